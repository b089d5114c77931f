#include "cnc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace cnc {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t Substream::next_u64() { return splitmix64(state_); }

double Substream::uniform01() {
  // 53 random bits, offset by half an ulp so the value is strictly inside
  // (0, 1); log() of the result is always finite.
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double Substream::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  double u1 = uniform01();
  double u2 = uniform01();
  double mag = std::sqrt(-2.0 * std::log(u1));
  double ang = 2.0 * std::numbers::pi * u2;
  cached_ = mag * std::sin(ang);
  has_cached_ = true;
  return mag * std::cos(ang);
}

std::uint64_t Substream::next_below(std::uint64_t bound) {
  // Rejection sampling over the largest multiple of bound.
  std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % bound;
}

Substream Rng::stream(std::string_view name) const {
  std::uint64_t s = seed_ ^ fnv1a(name);
  // Warm the mixer so nearby seeds diverge immediately.
  splitmix64(s);
  return Substream(s);
}

std::vector<int> sample_minibatch(Substream& rng, int n, int b) {
  if (n < 1 || b < 1 || b > n) {
    throw std::invalid_argument("sample_minibatch: need 1 <= b <= n, got b=" +
                                std::to_string(b) + ", n=" + std::to_string(n));
  }
  std::vector<int> pool(n);
  for (int i = 0; i < n; ++i) pool[i] = i;
  for (int i = 0; i < b; ++i) {
    int j = i + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n - i)));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(b);
  std::sort(pool.begin(), pool.end());
  return pool;
}

int sample_geometric(Substream& rng, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw std::invalid_argument("sample_geometric: gamma must be in (0,1)");
  }
  double u = rng.uniform01();
  return static_cast<int>(std::floor(std::log(u) / std::log(gamma)));
}

Eigen::VectorXd sample_sphere(Substream& rng, int d, double radius) {
  if (d < 1) throw std::invalid_argument("sample_sphere: d must be >= 1");
  if (!(radius > 0.0)) throw std::invalid_argument("sample_sphere: radius must be > 0");
  Eigen::VectorXd v(d);
  double norm = 0.0;
  do {
    for (int i = 0; i < d; ++i) v[i] = rng.normal();
    norm = v.norm();
  } while (norm == 0.0);
  return v * (radius / norm);
}

}  // namespace cnc
