#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace ttlab {

// Deterministic random source. All draws go through explicit algorithms
// (rejection sampling, Box-Muller) rather than std distributions, whose
// output is implementation-defined; mt19937_64 itself is pinned by the
// standard, so streams are identical across platforms for a given seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t uniform(std::uint64_t bound);

  // Uniform double in [0, 1), 53 bits of precision.
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double normal(double mean = 0.0, double stddev = 1.0);

  // Fisher-Yates; deterministic for a given seed and input order.
  template <typename V>
  void shuffle(V& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Derives an independent stream seed (splitmix64 over the pair).
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream);

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// FNV-1a 64-bit, used for input digests and vocab hashes.
std::uint64_t fnv1a64(const void* data, std::size_t len);
std::uint64_t fnv1a64(const std::string& s);
std::string to_hex(std::uint64_t v);

}  // namespace ttlab
