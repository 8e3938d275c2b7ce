#include "mvae/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mvae/error.hpp"

namespace mvae {

std::string_view to_string(Likelihood l) {
  return l == Likelihood::bernoulli ? "bernoulli" : "gaussian";
}

std::string_view to_string(ModelKind m) { return m == ModelKind::vae ? "vae" : "mvae"; }

Likelihood parse_likelihood(std::string_view s) {
  if (s == "bernoulli") return Likelihood::bernoulli;
  if (s == "gaussian" || s == "gaussian_fixed_var") return Likelihood::gaussian;
  throw ContractError("unknown likelihood '" + std::string(s) + "'");
}

ModelKind parse_model_kind(std::string_view s) {
  if (s == "vae") return ModelKind::vae;
  if (s == "mvae") return ModelKind::mvae;
  throw ContractError("unknown model '" + std::string(s) + "'");
}

std::array<BlockRef, kBlockCount> ParameterBlocks::blocks() {
  return {{{"enc_w1", &enc_w1, BlockRole::weight},
           {"enc_b1", &enc_b1, BlockRole::bias},
           {"enc_w_mu", &enc_w_mu, BlockRole::weight},
           {"enc_b_mu", &enc_b_mu, BlockRole::bias},
           {"enc_w_logvar", &enc_w_logvar, BlockRole::weight},
           {"enc_b_logvar", &enc_b_logvar, BlockRole::bias},
           {"dec_w1", &dec_w1, BlockRole::weight},
           {"dec_b1", &dec_b1, BlockRole::bias},
           {"dec_w_out", &dec_w_out, BlockRole::weight},
           {"dec_b_out", &dec_b_out, BlockRole::bias},
           {"coupling", &coupling, BlockRole::coupling}}};
}

std::array<ConstBlockRef, kBlockCount> ParameterBlocks::blocks() const {
  auto mut = const_cast<ParameterBlocks*>(this)->blocks();
  std::array<ConstBlockRef, kBlockCount> out;
  for (std::size_t i = 0; i < kBlockCount; ++i) out[i] = {mut[i].name, mut[i].matrix, mut[i].role};
  return out;
}

ParameterBlocks ParameterBlocks::zeros(const ModelSpec& spec) {
  const std::size_t d = spec.input_dim, h = spec.hidden, k = spec.latent;
  if (d == 0 || h == 0 || k == 0) throw ContractError("ModelSpec: dimensions must be positive");
  ParameterBlocks p;
  p.enc_w1 = Matrix(d, h);
  p.enc_b1 = Matrix(1, h);
  p.enc_w_mu = Matrix(h, k);
  p.enc_b_mu = Matrix(1, k);
  p.enc_w_logvar = Matrix(h, k);
  p.enc_b_logvar = Matrix(1, k);
  p.dec_w1 = Matrix(k, h);
  p.dec_b1 = Matrix(1, h);
  p.dec_w_out = Matrix(h, d);
  p.dec_b_out = Matrix(1, d);
  p.coupling = Matrix(k, k);
  return p;
}

std::size_t ParameterBlocks::parameter_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks()) n += b.matrix->size();
  return n;
}

bool ParameterBlocks::same_shape(const ParameterBlocks& other) const {
  const auto a = blocks();
  const auto b = other.blocks();
  for (std::size_t i = 0; i < kBlockCount; ++i) {
    if (a[i].matrix->rows() != b[i].matrix->rows() || a[i].matrix->cols() != b[i].matrix->cols())
      return false;
  }
  return true;
}

bool ParameterBlocks::all_finite() const {
  for (const auto& b : blocks())
    if (!b.matrix->all_finite()) return false;
  return true;
}

MlpParams MlpParams::zero_network(const ModelSpec& spec) {
  MlpParams p(ParameterBlocks::zeros(spec));
  p.coupling = Matrix::identity(spec.latent);
  return p;
}

MlpParams MlpParams::initialize(const ModelSpec& spec, Rng& rng) {
  MlpParams p = zero_network(spec);
  for (auto& b : p.blocks()) {
    if (b.role != BlockRole::weight) continue;
    Matrix& w = *b.matrix;
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (double& v : w.values()) v = rng.uniform(-limit, limit);
  }
  return p;
}

void MlpParams::check_shapes(const ModelSpec& spec) const {
  if (!same_shape(ParameterBlocks::zeros(spec))) {
    throw ContractError("MlpParams: block shapes disagree with model spec (D=" +
                        std::to_string(spec.input_dim) + ", hidden=" + std::to_string(spec.hidden) +
                        ", d_z=" + std::to_string(spec.latent) + ")");
  }
}

ParameterBlocks GradBuffer::zeros_like(const ParameterBlocks& p) {
  ParameterBlocks z;
  auto dst = z.blocks();
  const auto src = p.blocks();
  for (std::size_t i = 0; i < kBlockCount; ++i)
    *dst[i].matrix = Matrix(src[i].matrix->rows(), src[i].matrix->cols());
  return z;
}

void GradBuffer::zero() {
  for (auto& b : blocks()) b.matrix->fill(0.0);
}

GradBuffer& GradBuffer::operator+=(const GradBuffer& other) {
  auto dst = blocks();
  const auto src = other.blocks();
  for (std::size_t i = 0; i < kBlockCount; ++i) *dst[i].matrix += *src[i].matrix;
  return *this;
}

GradBuffer& GradBuffer::operator*=(double s) {
  for (auto& b : blocks()) *b.matrix *= s;
  return *this;
}

double sigmoid(double a) {
  if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
  const double e = std::exp(a);
  return e / (1.0 + e);
}

namespace {

Matrix affine(const Matrix& x, const Matrix& w, const Matrix& b) {
  Matrix y = matmul(x, w);
  add_row_vector(y, b);
  return y;
}

void tanh_inplace(Matrix& m) {
  for (double& v : m.values()) v = std::tanh(v);
}

// dL/dpre for y = tanh(pre), given dL/dy and y.
Matrix tanh_backward(const Matrix& d_out, const Matrix& activation) {
  Matrix d = d_out;
  auto dv = d.values();
  auto a = activation.values();
  for (std::size_t i = 0; i < dv.size(); ++i) dv[i] *= 1.0 - a[i] * a[i];
  return d;
}

void require_cols(const Matrix& m, std::size_t cols, const char* what) {
  if (m.cols() != cols) {
    throw ContractError(std::string(what) + ": expected " + std::to_string(cols) +
                        " columns, got " + std::to_string(m.cols()));
  }
}

void require_shape(const Matrix& m, std::size_t rows, std::size_t cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ContractError(std::string(what) + ": expected " + std::to_string(rows) + "x" +
                        std::to_string(cols) + ", got " + std::to_string(m.rows()) + "x" +
                        std::to_string(m.cols()));
  }
}

}  // namespace

EncoderOutput encode(const MlpParams& params, const Matrix& x) {
  require_cols(x, params.input_dim(), "encode");
  EncoderOutput out;
  out.tape.input = x;
  out.tape.hidden = affine(x, params.enc_w1, params.enc_b1);
  tanh_inplace(out.tape.hidden);
  out.mu_raw = affine(out.tape.hidden, params.enc_w_mu, params.enc_b_mu);
  out.tape.logvar_pre = affine(out.tape.hidden, params.enc_w_logvar, params.enc_b_logvar);
  out.logvar = out.tape.logvar_pre;
  for (double& v : out.logvar.values()) v = std::clamp(v, kLogvarMin, kLogvarMax);
  return out;
}

DecoderOutput decode(const MlpParams& params, const Matrix& z, Likelihood head) {
  require_cols(z, params.latent(), "decode");
  DecoderOutput out;
  out.tape.latent = z;
  out.tape.hidden = affine(z, params.dec_w1, params.dec_b1);
  tanh_inplace(out.tape.hidden);
  out.tape.logits = affine(out.tape.hidden, params.dec_w_out, params.dec_b_out);
  out.output = out.tape.logits;
  if (head == Likelihood::bernoulli) {
    for (double& v : out.output.values()) v = sigmoid(v);
  }
  return out;
}

Matrix decoder_backward(const MlpParams& params, const DecoderTape& tape, const Matrix& d_logits,
                        GradBuffer& grads) {
  const std::size_t batch = tape.latent.rows();
  require_shape(tape.hidden, batch, params.hidden(), "decoder_backward: tape hidden");
  require_shape(tape.logits, batch, params.input_dim(), "decoder_backward: tape logits");
  require_shape(d_logits, batch, params.input_dim(), "decoder_backward: upstream gradient");
  if (!grads.same_shape(params)) throw ContractError("decoder_backward: gradient buffer shape");

  grads.dec_w_out += matmul_tn(tape.hidden, d_logits);
  grads.dec_b_out += column_sums(d_logits);
  const Matrix d_hidden = tanh_backward(matmul_nt(d_logits, params.dec_w_out), tape.hidden);
  grads.dec_w1 += matmul_tn(tape.latent, d_hidden);
  grads.dec_b1 += column_sums(d_hidden);
  return matmul_nt(d_hidden, params.dec_w1);
}

void encoder_backward(const MlpParams& params, const EncoderTape& tape, const Matrix& d_mu_raw,
                      const Matrix& d_logvar, GradBuffer& grads) {
  const std::size_t batch = tape.input.rows();
  const std::size_t k = params.latent();
  require_shape(tape.hidden, batch, params.hidden(), "encoder_backward: tape hidden");
  require_shape(tape.logvar_pre, batch, k, "encoder_backward: tape logvar");
  require_shape(d_mu_raw, batch, k, "encoder_backward: d_mu_raw");
  require_shape(d_logvar, batch, k, "encoder_backward: d_logvar");
  if (!grads.same_shape(params)) throw ContractError("encoder_backward: gradient buffer shape");

  Matrix d_pre = d_logvar;
  auto dp = d_pre.values();
  auto pre = tape.logvar_pre.values();
  for (std::size_t i = 0; i < dp.size(); ++i) {
    if (pre[i] < kLogvarMin || pre[i] > kLogvarMax) dp[i] = 0.0;
  }

  grads.enc_w_mu += matmul_tn(tape.hidden, d_mu_raw);
  grads.enc_b_mu += column_sums(d_mu_raw);
  grads.enc_w_logvar += matmul_tn(tape.hidden, d_pre);
  grads.enc_b_logvar += column_sums(d_pre);

  Matrix d_hidden = matmul_nt(d_mu_raw, params.enc_w_mu);
  d_hidden += matmul_nt(d_pre, params.enc_w_logvar);
  d_hidden = tanh_backward(d_hidden, tape.hidden);
  grads.enc_w1 += matmul_tn(tape.input, d_hidden);
  grads.enc_b1 += column_sums(d_hidden);
}

}  // namespace mvae
