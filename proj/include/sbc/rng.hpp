#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace sbc {

// Platform-independent random source. std::shuffle and the std
// distributions are implementation-defined, so index draws are done here
// directly on the raw mt19937_64 stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix(seed)) {}
  Rng(std::uint64_t seed, std::uint64_t stream) : engine_(mix(seed ^ mix(stream + 0x9E3779B97F4A7C15ULL))) {}

  // Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

  // Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }
  template <typename T>
  void shuffle(std::vector<T>& items) {
    shuffle(std::span<T>(items));
  }

  // `count` distinct indices from [0, n), returned ascending.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count);

  static std::uint64_t mix(std::uint64_t x) noexcept;

 private:
  std::mt19937_64 engine_;
};

}  // namespace sbc
