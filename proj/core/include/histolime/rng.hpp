#pragma once

#include <cstdint>
#include <limits>
#include <span>

namespace histolime {

__extension__ using uint128_t = unsigned __int128;

/// splitmix64. The constants are part of the manifest format: any
/// implementation seeded identically reproduces the same shuffles and masks.
///
///   state += 0x9E3779B97F4A7C15
///   z = (state ^ (state >> 30)) * 0xBF58476D1CE4E5B9
///   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   return z ^ (z >> 31)
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type next() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  result_type operator()() noexcept { return next(); }

  /// Integer in [0, bound) as the high 64 bits of next() * bound.
  std::uint64_t below(std::uint64_t bound) noexcept {
    return static_cast<std::uint64_t>((static_cast<uint128_t>(next()) * bound) >> 64);
  }

  /// Double in [0, 1) from the top 53 bits.
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Fair coin from the most significant bit.
  bool coin() noexcept { return (next() >> 63) != 0; }

 private:
  std::uint64_t state_;
};

/// Fisher-Yates, walking i from n-1 down to 1 and swapping with below(i+1).
template <typename T>
void seeded_shuffle(std::span<T> items, SplitMix64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

}  // namespace histolime
