#ifndef CATFIT_RNG_HPP
#define CATFIT_RNG_HPP

#include <cstdint>
#include <string_view>
#include <vector>

#include "catfit/common.hpp"

namespace catfit {

// All randomness in the toolkit flows from one root seed through named
// substreams, so runs are reproducible and adding parallelism never
// reorders draws. Each substream is an independent xoshiro-style engine
// keyed by (seed, name, indices). Distribution sampling is implemented
// here rather than with std::<random> adaptors so that sequences are
// pinned down exactly, independent of the standard library build.
class Rng {
 public:
  Rng(std::uint64_t root_seed, std::string_view stream, std::uint64_t a = 0,
      std::uint64_t b = 0);

  std::uint64_t next_u64();

  // Uniform on [0, 1).
  double next_double();

  // Uniform integer on [0, n), n >= 1.
  std::uint64_t next_below(std::uint64_t n);

  // Standard normal via Box-Muller (pairs cached).
  double next_normal();

  bool next_coin() { return (next_u64() >> 63) != 0; }

  // Binomial(n, p) by direct Bernoulli counting; n stays small here.
  long next_binomial(long n, double p);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_[4];
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace catfit

#endif  // CATFIT_RNG_HPP
