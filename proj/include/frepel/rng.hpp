#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace frepel {

/// Names one reproducible random stream. Equal (seed, stream_id) pairs
/// reproduce the same draw sequence on every platform; distinct stream ids
/// give statistically independent streams from the same master seed.
/// Ensemble runners hand replica r the stream stream_id + r, so results do
/// not depend on scheduling or batching.
struct RngStream {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;

  RngStream with_offset(std::uint64_t k) const { return {seed, stream_id + k}; }
};

/// Deterministic uniform/Gaussian source. mt19937_64 seeded through
/// std::seed_seq (both are bit-specified by the standard), with hand-rolled
/// output conversions: std::normal_distribution and friends are
/// implementation-defined and would break bit reproducibility across
/// standard libraries.
class Rng {
 public:
  explicit Rng(RngStream stream) : eng_(make_engine(stream)) {}

  std::uint64_t raw() { return eng_(); }

  /// Uniform on [0, 1) with 53-bit resolution.
  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_below(std::uint64_t n) {
    // Desk-scale n (coordinate counts), so the floor construction's
    // 2^-53-level bias is irrelevant; determinism is what matters here.
    return static_cast<std::uint64_t>(uniform01() * static_cast<double>(n));
  }

  /// Standard normal via Box-Muller; the second member of each pair is
  /// cached, so draws come in a fixed count-per-call pattern.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = (static_cast<double>(eng_() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

 private:
  static std::mt19937_64 make_engine(RngStream s) {
    std::seed_seq seq{
        static_cast<std::uint32_t>(s.seed), static_cast<std::uint32_t>(s.seed >> 32),
        static_cast<std::uint32_t>(s.stream_id), static_cast<std::uint32_t>(s.stream_id >> 32)};
    return std::mt19937_64(seq);
  }

  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace frepel
