#include "catfit/rng.hpp"

#include <cmath>

namespace catfit {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace

Rng::Rng(std::uint64_t root_seed, std::string_view stream, std::uint64_t a,
         std::uint64_t b) {
  std::uint64_t key = root_seed;
  key ^= fnv1a64(stream.data(), stream.size());
  key ^= a * 0x9e3779b97f4a7c15ull;
  key ^= rotl(b * 0xbf58476d1ce4e5b9ull, 17);
  for (auto& s : state_) s = splitmix64(key);
}

std::uint64_t Rng::next_u64() {
  // xoshiro256**
  std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
  std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double Rng::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::next_below(std::uint64_t n) {
  // Rejection sampling to stay exactly uniform.
  std::uint64_t threshold = (0 - n) % n;
  while (true) {
    std::uint64_t r = next_u64();
    if (r >= threshold) return r % n;
  }
}

double Rng::next_normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  double u1 = 0.0;
  do {
    u1 = next_double();
  } while (u1 <= 0.0);
  double u2 = next_double();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * M_PI * u2;
  cached_normal_ = r * std::sin(theta);
  has_cached_normal_ = true;
  return r * std::cos(theta);
}

long Rng::next_binomial(long n, double p) {
  long k = 0;
  for (long i = 0; i < n; ++i) {
    if (next_double() < p) ++k;
  }
  return k;
}

}  // namespace catfit
