#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>
#include <utility>

#include "mvae/matrix.hpp"
#include "mvae/rng.hpp"

namespace mvae {

inline constexpr std::size_t kDefaultHidden = 500;
inline constexpr double kLogvarMin = -10.0;
inline constexpr double kLogvarMax = 10.0;

enum class Likelihood : std::uint8_t { bernoulli = 0, gaussian = 1 };
enum class ModelKind : std::uint8_t { vae = 0, mvae = 1 };

std::string_view to_string(Likelihood l);
std::string_view to_string(ModelKind m);
Likelihood parse_likelihood(std::string_view s);
ModelKind parse_model_kind(std::string_view s);

/// Architecture and posterior family of one model. Stored in checkpoints.
struct ModelSpec {
  std::size_t input_dim = 0;
  std::size_t hidden = kDefaultHidden;
  std::size_t latent = 2;
  Likelihood likelihood = Likelihood::bernoulli;
  ModelKind model = ModelKind::mvae;
  bool couple_mean = true;

  /// Whether the coupling matrix participates in the posterior.
  bool coupled() const noexcept { return model == ModelKind::mvae; }
  /// couple_mean only has an effect for the coupled posterior.
  bool mean_coupled() const noexcept { return coupled() && couple_mean; }

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

enum class BlockRole { weight, bias, coupling };

struct BlockRef {
  std::string_view name;
  Matrix* matrix;
  BlockRole role;
};

struct ConstBlockRef {
  std::string_view name;
  const Matrix* matrix;
  BlockRole role;
};

inline constexpr std::size_t kBlockCount = 11;

/// The trainable matrices of the encoder/decoder pair plus the coupling
/// matrix. Layers compute x * W + b with x batch-major.
struct ParameterBlocks {
  Matrix enc_w1, enc_b1;
  Matrix enc_w_mu, enc_b_mu;
  Matrix enc_w_logvar, enc_b_logvar;
  Matrix dec_w1, dec_b1;
  Matrix dec_w_out, dec_b_out;
  Matrix coupling;

  std::array<BlockRef, kBlockCount> blocks();
  std::array<ConstBlockRef, kBlockCount> blocks() const;

  /// All-zero blocks with the shapes implied by spec.
  static ParameterBlocks zeros(const ModelSpec& spec);

  std::size_t input_dim() const noexcept { return enc_w1.rows(); }
  std::size_t hidden() const noexcept { return enc_w1.cols(); }
  std::size_t latent() const noexcept { return coupling.rows(); }
  std::size_t parameter_count() const;

  bool same_shape(const ParameterBlocks& other) const;
  bool all_finite() const;

  friend bool operator==(const ParameterBlocks&, const ParameterBlocks&) = default;
};

struct MlpParams : ParameterBlocks {
  MlpParams() = default;
  explicit MlpParams(ParameterBlocks b) : ParameterBlocks(std::move(b)) {}

  /// Glorot-uniform weights, zero biases, identity coupling.
  static MlpParams initialize(const ModelSpec& spec, Rng& rng);
  /// Zero weights and biases, identity coupling.
  static MlpParams zero_network(const ModelSpec& spec);

  /// Throws ContractError unless block shapes agree with spec.
  void check_shapes(const ModelSpec& spec) const;
};

/// One gradient matrix per parameter block, shaped like the parameters.
struct GradBuffer : ParameterBlocks {
  GradBuffer() = default;
  explicit GradBuffer(const ParameterBlocks& like) : ParameterBlocks(zeros_like(like)) {}

  void zero();
  GradBuffer& operator+=(const GradBuffer& other);
  GradBuffer& operator*=(double s);

 private:
  static ParameterBlocks zeros_like(const ParameterBlocks& p);
};

struct EncoderTape {
  Matrix input;
  Matrix hidden;      // tanh activations
  Matrix logvar_pre;  // before clamping
};

struct DecoderTape {
  Matrix latent;
  Matrix hidden;  // tanh activations
  Matrix logits;  // output pre-activation
};

struct EncoderOutput {
  Matrix mu_raw;
  Matrix logvar;  // clamped to [kLogvarMin, kLogvarMax]
  EncoderTape tape;
};

struct DecoderOutput {
  /// sigmoid(logits) for the Bernoulli head, logits for the Gaussian head.
  Matrix output;
  DecoderTape tape;
};

EncoderOutput encode(const MlpParams& params, const Matrix& x);
DecoderOutput decode(const MlpParams& params, const Matrix& z, Likelihood head);

/// Accumulates decoder gradients into grads given dL/dlogits; returns dL/dz.
Matrix decoder_backward(const MlpParams& params, const DecoderTape& tape, const Matrix& d_logits,
                        GradBuffer& grads);

/// Accumulates encoder gradients into grads given dL/dmu_raw and dL/dlogvar
/// (with respect to the clamped log-variance).
void encoder_backward(const MlpParams& params, const EncoderTape& tape, const Matrix& d_mu_raw,
                      const Matrix& d_logvar, GradBuffer& grads);

double sigmoid(double a);

}  // namespace mvae
