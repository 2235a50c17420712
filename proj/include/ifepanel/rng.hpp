#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>

namespace ifepanel {

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t z) noexcept;

// Child key for an indexed sub-stream (replication, start, bootstrap draw).
std::uint64_t derive_seed(std::uint64_t key, std::uint64_t stream) noexcept;

/*
 * Counter-based generator: draw n is mix64(key + n * 0x9E3779B97F4A7C15),
 * n = 1, 2, ...  Uniforms take the top 53 bits; normals are Box-Muller pairs.
 * See docs/rng.md.
 */
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t key, std::uint64_t counter = 0) noexcept
      : key_(key), counter_(counter) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept;

  double uniform() noexcept;                 // [0, 1)
  double normal() noexcept;                  // N(0, 1)
  std::size_t index(std::size_t n) noexcept; // uniform on {0..n-1}, n >= 1
  int rademacher() noexcept;                 // +1 or -1

  CounterRng split(std::uint64_t stream) const noexcept {
    return CounterRng(derive_seed(key_, stream));
  }

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace ifepanel
