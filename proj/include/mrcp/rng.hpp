#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace mrcp {

/// The project-wide pseudo-random source: a 64-bit Mersenne Twister whose
/// state is derived from (seed, stream) through a SplitMix64 mix, so that
/// independent workers can draw from non-overlapping, reproducible streams.
///
/// Uniform and normal draws are computed here rather than through the
/// standard distribution objects, whose algorithms are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  /// A child generator for a sub-task; depends only on this generator's
  /// (seed, stream) pair and `stream`, never on how many draws were made.
  Rng split(std::uint64_t stream) const;

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal (Box-Muller, cached pair).
  double normal();
  /// Uniform integer in [0, n); n > 0.
  std::size_t below(std::size_t n);

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::swap(values[i - 1], values[below(i)]);
    }
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Stable 64-bit FNV-1a hash of a byte string.
std::uint64_t fnv1a64(std::span<const char> bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

}  // namespace mrcp
