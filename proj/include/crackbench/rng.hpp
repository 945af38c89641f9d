#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace crackbench {

// Shuffling contract shared by dataset splits and per-epoch sampling. The
// engine is std::mt19937_64 (its output sequence is fixed by the C++ standard),
// seeded directly with the 64-bit seed. Bounded draws use rejection sampling on
// the raw 64-bit output, and shuffles are Fisher-Yates from the last element
// down. Standard library distributions are avoided because their algorithms
// are implementation-defined.
class SplitRng {
public:
  explicit SplitRng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
    std::uint64_t x = engine_();
    while (x >= limit) {
      x = engine_();
    }
    return x % bound;
  }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

  std::uint64_t next() { return engine_(); }

private:
  std::mt19937_64 engine_;
};

} // namespace crackbench
