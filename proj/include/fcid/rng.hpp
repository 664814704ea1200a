#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace fcid {

/// Seeded random stream used by every stochastic choice in the library.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The standard distributions are implementation-defined, so the
/// transforms are done here:
///   - uniform(): top 53 bits of one draw, scaled by 2^-53, in [0, 1)
///   - uniform_index(n): rejection sampling on the raw 64-bit draw, unbiased
///   - normal(): Box-Muller on two uniforms, second value cached
///   - shuffle(): Fisher-Yates from the back using uniform_index
/// Given the same seed, every method returns the same values on any platform
/// with IEEE-754 doubles and a correctly rounded libm log/sqrt/cos/sin.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t uniform_index(std::size_t n);
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(items[i - 1], items[j]);
    }
  }

  std::vector<std::size_t> permutation(std::size_t n);

  /// Independent child stream; consumes one draw from this stream.
  Rng fork() { return Rng(next_u64()); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace fcid
