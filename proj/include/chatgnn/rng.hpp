#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>

namespace chatgnn {

/// xoshiro256** seeded through splitmix64.
///
/// All derived draws (uniform reals, bounded integers, shuffles) are computed
/// here rather than through <random> distributions, whose output is
/// implementation-defined; the same seed gives the same stream everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next_u64() noexcept;
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, bound). bound must be positive.
  std::uint64_t below(std::uint64_t bound) noexcept;

  template <class T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  /// Independent generator for a sub-task, derived from this one's seed.
  Rng fork(std::uint64_t stream) const noexcept;

  const std::array<std::uint64_t, 4>& state() const noexcept { return state_; }

 private:
  std::array<std::uint64_t, 4> state_{};
  std::uint64_t seed_ = 0;
};

std::uint64_t splitmix64(std::uint64_t& x) noexcept;

}  // namespace chatgnn
