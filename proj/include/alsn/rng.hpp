#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace alsn {

// Mixes a master seed with a list of stream coordinates (generation, index,
// purpose tag, ...) into an independent 64-bit seed. Based on splitmix64.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> coords);

// Deterministic random source. The engine is std::mt19937_64, whose output
// sequence is fixed by the standard; the bounded draws below are written out
// here because the std distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform integer in [0, n). n must be positive.
  int uniform_int(int n);

  // Uniform integer in [lo, hi].
  int uniform_range(int lo, int hi) { return lo + uniform_int(hi - lo + 1); }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform();

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<int>(last - first);
    for (int i = n - 1; i > 0; --i) {
      const int j = uniform_int(i + 1);
      std::swap(first[i], first[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace alsn
