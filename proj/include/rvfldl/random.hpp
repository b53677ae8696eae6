#pragma once

// Seeded random streams and the samplers used by the coding and
// enhancement stages. The generator is SplitMix64; its constants and the
// uniform/normal/Half-Cauchy transforms are documented in
// docs/determinism.md so the draws can be reproduced elsewhere.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

#include <Eigen/Core>

#include "rvfldl/errors.hpp"

namespace rvfldl {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

/// SplitMix64 output mixer (Stafford variant 13). A bijection on 64 bits.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Single-owner deterministic stream. Copying a stream forks an
/// independent replay of the same future sequence.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : state_(seed), origin_seed_(seed) {}

  std::uint64_t next_u64() {
    state_ += kGoldenGamma;
    return mix64(state_);
  }

  /// Uniform in the open interval (0,1): the top 53 bits form the code,
  /// code 0 is rejected so log/tan transforms stay finite.
  double next_uniform_open() {
    for (;;) {
      const std::uint64_t code = next_u64() >> 11;
      if (code != 0) return static_cast<double>(code) * 0x1.0p-53;
    }
  }

  void reset() { state_ = origin_seed_; }

  std::uint64_t origin_seed() const { return origin_seed_; }
  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
  std::uint64_t origin_seed_;
};

inline RandomStream seeded_stream(std::uint64_t seed) { return RandomStream(seed); }

inline constexpr std::uint32_t kMaxJobIndex = 1u << 16;

/// Seed for the (fold, run) job of a master seed. The fold index fills
/// bits 16-31 and the run index bits 0-15 of a packed word, which is
/// xored into the mixed master and mixed again.
inline std::uint64_t child_seed(std::uint64_t master, std::uint32_t fold, std::uint32_t run) {
  if (fold >= kMaxJobIndex || run >= kMaxJobIndex) {
    throw ConfigError("child_seed: fold and run must be < 65536 (got fold=" +
                      std::to_string(fold) + ", run=" + std::to_string(run) + ")");
  }
  const std::uint64_t packed = (static_cast<std::uint64_t>(fold) << 16) | run;
  return mix64((mix64(master + kGoldenGamma) ^ packed) + kGoldenGamma);
}

/// n i.i.d. N(0,1) draws by Box-Muller. Consumes uniforms in pairs:
/// 2*ceil(n/2) uniforms (plus any rejected zero codes); when n is odd the
/// second value of the last pair is discarded.
inline Eigen::VectorXd sample_standard_normal(RandomStream& stream, Eigen::Index n) {
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; i += 2) {
    const double u1 = stream.next_uniform_open();
    const double u2 = stream.next_uniform_open();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    out[i] = radius * std::cos(angle);
    if (i + 1 < n) out[i + 1] = radius * std::sin(angle);
  }
  return out;
}

/// Fills a matrix column-major (column 0 first) from consecutive normal draws.
inline Eigen::MatrixXd sample_standard_normal(RandomStream& stream, Eigen::Index rows,
                                              Eigen::Index cols) {
  Eigen::VectorXd flat = sample_standard_normal(stream, rows * cols);
  return Eigen::Map<Eigen::MatrixXd>(flat.data(), rows, cols);
}

struct HalfCauchyParams {
  double scale = 1.0;  // location is fixed at 0
};

/// Inverse CDF of C+(0, scale) evaluated at u in (0,1).
inline double half_cauchy_quantile(double u, const HalfCauchyParams& params) {
  if (!(params.scale > 0.0)) throw ConfigError("Half-Cauchy scale must be > 0");
  return params.scale * std::tan(std::numbers::pi * u / 2.0);
}

inline double sample_half_cauchy(RandomStream& stream, const HalfCauchyParams& params = {}) {
  return half_cauchy_quantile(stream.next_uniform_open(), params);
}

}  // namespace rvfldl
