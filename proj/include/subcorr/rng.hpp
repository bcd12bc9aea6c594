#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "subcorr/errors.hpp"

namespace subcorr {

/// Deterministic random stream used by the randomized algorithms.
///
/// The generator is std::mt19937_64 (the standard fixes its output sequence,
/// so identical (master_seed, stream_index) pairs reproduce bit-identical
/// draws on every platform).  All derived draws below avoid the standard
/// distribution classes, whose output is implementation-defined.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_index)
      : master_seed_(master_seed),
        stream_index_(stream_index),
        engine_(make_engine(master_seed, stream_index)) {}

  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t stream_index() const { return stream_index_; }

  /// Raw 64-bit draw.
  std::uint64_t next_u64() { return engine_(); }

  /// Uniform draw from {0, 1, ..., n-1}, exactly uniform via rejection
  /// sampling (no modulo bias).
  std::uint64_t uniform_below(std::uint64_t n) {
    if (n == 0) throw ParameterError("uniform_below: n must be positive");
    if (n == 1) return 0;
    // Reject draws below 2^64 mod n, then reduce.
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = engine_();
      if (r >= threshold) return r % n;
    }
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform_double() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Bernoulli draw; theta = 0 never fires.
  bool bernoulli(double theta) { return uniform_double() < theta; }

  /// Standard normal via Box-Muller (two uniform draws per call).
  double normal() {
    const double u1 = 1.0 - uniform_double();  // (0, 1]
    const double u2 = uniform_double();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Uniform random permutation of {0, ..., n-1} by Fisher-Yates driven by
  /// uniform_below, hence exactly uniform over all n! orderings.
  std::vector<int> permutation(int n) {
    std::vector<int> p(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
    for (int i = n - 1; i > 0; --i) {
      const auto j = static_cast<int>(
          uniform_below(static_cast<std::uint64_t>(i) + 1));
      std::swap(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(j)]);
    }
    return p;
  }

 private:
  static std::mt19937_64 make_engine(std::uint64_t master_seed,
                                     std::uint64_t stream_index) {
    // seed_seq consumes 32-bit words; split both 64-bit inputs.
    std::seed_seq seq{
        static_cast<std::uint32_t>(master_seed),
        static_cast<std::uint32_t>(master_seed >> 32),
        static_cast<std::uint32_t>(stream_index),
        static_cast<std::uint32_t>(stream_index >> 32),
    };
    return std::mt19937_64(seq);
  }

  std::uint64_t master_seed_;
  std::uint64_t stream_index_;
  std::mt19937_64 engine_;
};

/// Stream index reserved for generating the right-hand side of a system;
/// trial streams use indices 0..trials-1 and never collide with it.
inline constexpr std::uint64_t kRhsStreamIndex = ~std::uint64_t{0};

}  // namespace subcorr
