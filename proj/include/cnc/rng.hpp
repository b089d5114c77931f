#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace cnc {

// Counter-free splitmix64 stream. Cheap to fork, bit-exact across runs.
class Substream {
 public:
  explicit Substream(std::uint64_t state) : state_(state) {}

  std::uint64_t next_u64();

  // Uniform in the open interval (0, 1); never returns 0 or 1.
  double uniform01();

  // Standard normal via Box-Muller; pairs are cached.
  double normal();

  // Uniform integer in [0, bound).
  std::uint64_t next_below(std::uint64_t bound);

 private:
  std::uint64_t state_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

// Seeded root generator. Each named substream is an independent stream:
// drawing more from one never shifts another.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed) {}

  Substream stream(std::string_view name) const;
  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
};

// Uniform size-b subset of {0, ..., n-1} without replacement, sorted
// ascending. Partial Fisher-Yates.
std::vector<int> sample_minibatch(Substream& rng, int n, int b);

// Geometric on {0, 1, 2, ...} with P(N = k) = (1 - gamma) * gamma^k,
// so E[N] = gamma / (1 - gamma). Inverse-CDF sampling.
int sample_geometric(Substream& rng, double gamma);

// Uniform direction on the sphere of the given radius.
Eigen::VectorXd sample_sphere(Substream& rng, int d, double radius);

}  // namespace cnc
