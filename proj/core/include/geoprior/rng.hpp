#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

namespace geoprior {

/// Seeded generator used by every stochastic routine.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The distributions on top of it (uniform, normal, index) are
/// implemented here rather than taken from <random>, so a given seed produces
/// the same numbers with any standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  /// Independent generator for a named sub-stream of `seed`.
  static Rng stream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();

  /// Standard normal via the Box-Muller transform; the paired value is cached.
  double normal();

  /// Uniform integer in [0, n). n must be > 0.
  std::size_t index(std::size_t n);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

/// SplitMix64 finalizer, used to derive stream seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) noexcept;

}  // namespace geoprior
