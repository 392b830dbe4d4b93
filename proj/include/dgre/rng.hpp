#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace dgre {

// Deterministic random source shared by every stage. mt19937_64 supplies the
// raw stream; the distributions are implemented here rather than taken from
// <random> so that a given seed produces the same values on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform double in [0, 1).
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Unbiased uniform integer in [0, bound), bound > 0.
  std::uint64_t uniform_int(std::uint64_t bound);

  // Gaussian via Box-Muller.
  double normal(double mean = 0.0, double stddev = 1.0);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct values from [0, n) in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Stable derivation of independent substream seeds from one master seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);
std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag);

}  // namespace dgre
