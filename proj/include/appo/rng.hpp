#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>

namespace appo {

/**
 * SplitMix64: a counter-based 64-bit generator.
 *
 * The state is a plain counter advanced by a fixed odd increment; each output
 * is a finalizing hash of the counter. Child streams produced by split() are
 * seeded from parent draws, so an entire tree of streams is reproducible,
 * bit for bit, from the root seed on any platform (integer arithmetic only,
 * no standard-library distributions involved).
 */
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  static constexpr std::uint64_t min() { return 0; }
  static constexpr std::uint64_t max() { return ~std::uint64_t{0}; }

  std::uint64_t operator()() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Child stream seeded from the next draw; advances this stream once.
  SplitMix64 split() { return SplitMix64((*this)()); }

  /// Tagged child stream; does not advance this stream. Distinct tags give
  /// unrelated streams, so components can derive private streams from one
  /// root seed without coordinating draw order.
  SplitMix64 split(std::uint64_t tag) const {
    SplitMix64 mixer(state_ ^ (0xA0761D6478BD642FULL * (tag + 1)));
    return SplitMix64(mixer());
  }

  /// Uniform double in [0, 1) built from the top 53 bits of one draw.
  double uniform01() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform01() < p; }

  /// Index sampled proportionally to a nonnegative weight row.
  int categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0)) {
      throw std::invalid_argument("categorical: weight row sums to zero");
    }
    const double u = uniform01() * total;
    double acc = 0.0;
    int last_positive = -1;
    for (int i = 0; i < static_cast<int>(weights.size()); ++i) {
      if (weights[i] > 0.0) {
        last_positive = i;
        acc += weights[i];
        if (u < acc) return i;
      }
    }
    return last_positive;  // u landed on the rounding slack past the last bin
  }

 private:
  std::uint64_t state_;
};

}  // namespace appo
