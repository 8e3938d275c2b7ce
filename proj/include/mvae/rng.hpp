#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "mvae/matrix.hpp"

namespace mvae {

/// Seeded random source. The underlying engine is mt19937_64, whose output
/// sequence is fixed by the C++ standard; all conversions to doubles are done
/// here rather than through <random> distributions, whose algorithms are
/// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const noexcept { return seed_; }

  /// Independent stream for a named purpose (e.g. "init", "shuffle").
  Rng derive(std::string_view tag, std::uint64_t index = 0) const;

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (0, 1].
  double uniform_open_zero();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal();

  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// rows x cols matrix of i.i.d. N(0, 1) draws, filled row by row.
Matrix randn(Rng& rng, std::size_t rows, std::size_t cols);

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace mvae
