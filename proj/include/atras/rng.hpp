#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <utility>

namespace atras {

/// SplitMix64 (Steele, Lea & Flood 2014). The algorithm is part of the
/// reproducibility contract: every seeded sequence in the library comes from
/// here, never from the platform's <random> distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept : seed_(seed), state_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Unbiased integer in [0, bound) by rejection; bound must be > 0.
  std::uint64_t below(std::uint64_t bound) noexcept {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  /// Fisher–Yates, iterating from the back.
  template <typename T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
};

/// Mixes a base seed with stream identifiers into an independent seed.
inline std::uint64_t derive_seed(std::uint64_t base,
                                 std::initializer_list<std::uint64_t> stream) noexcept {
  Rng mixer(base);
  std::uint64_t acc = mixer.next_u64();
  for (std::uint64_t id : stream) {
    Rng step(acc ^ (id * 0xD1B54A32D192ED03ULL + 0x632BE59BD9B4E019ULL));
    acc = step.next_u64();
  }
  return acc;
}

}  // namespace atras
