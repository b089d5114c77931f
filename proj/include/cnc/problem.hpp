#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cnc/rng.hpp"

namespace cnc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct ProblemMeta {
  // Bound on ||grad f_z|| over the sampling box, if known.
  std::optional<double> grad_bound_l;
  double smoothness_L = 0.0;
  std::optional<double> hessian_lipschitz_rho;
  std::string grad_bound_box;  // how grad_bound_l was obtained
};

// Finite-sum objective f(x) = (1/n) sum_z f_z(x) with per-component value,
// gradient and Hessian-vector oracles. First-order calls bump the IFO
// counter; Hessian-vector calls are counted separately.
class FiniteSumProblem {
 public:
  using ValueFn = std::function<double(const Vector&, int)>;
  using GradFn = std::function<Vector(const Vector&, int)>;
  using HvpFn = std::function<Vector(const Vector&, int, const Vector&)>;

  FiniteSumProblem(int n, int d, ValueFn value, GradFn grad, HvpFn hvp,
                   ProblemMeta meta);

  int n() const { return n_; }
  int d() const { return d_; }
  const ProblemMeta& meta() const { return meta_; }

  double component_value(const Vector& x, int z) const;
  Vector component_grad(const Vector& x, int z) const;
  Vector component_hvp(const Vector& x, int z, const Vector& v) const;

  double eval_full(const Vector& x) const;
  Vector grad_full(const Vector& x) const;
  Vector grad_minibatch(const Vector& x, std::span<const int> indices) const;
  Vector hvp_full(const Vector& x, const Vector& v) const;

  std::int64_t ifo_calls() const { return ifo_calls_.load(std::memory_order_relaxed); }
  std::int64_t hvp_calls() const { return hvp_calls_.load(std::memory_order_relaxed); }
  void reset_counters() const;

 private:
  void check_point(const Vector& x) const;
  void check_index(int z) const;

  int n_;
  int d_;
  ValueFn value_;
  GradFn grad_;
  HvpFn hvp_;
  ProblemMeta meta_;
  mutable std::atomic<std::int64_t> ifo_calls_{0};
  mutable std::atomic<std::int64_t> hvp_calls_{0};
};

struct Dataset {
  Matrix features;          // n x d
  std::vector<int> labels;  // each 0 or 1
  int n = 0;
  int d = 0;
  std::uint64_t seed = 0;

  // Header `y,z_1,...,z_d`, class-0 rows first. Deterministic byte output.
  void write_csv(std::ostream& out) const;
};

// First n/2 rows ~ N(0, I) with label 0, remaining n/2 ~ N(1, I) with
// label 1. n must be even and positive.
Dataset generate_dataset(int n, int d, std::uint64_t seed);

// f_i(x) = sigmoid(y_i z_i^T x) + lambda * sum_j x_j^2 / (1 + x_j^2).
// Labels stay in {0, 1} as written; remap_labels maps them to {-1, +1}
// for a variant where no component is constant in x.
FiniteSumProblem make_sigmoid_problem(const Dataset& data, double lambda,
                                      bool remap_labels = false);

struct QuadraticSaddleSpec {
  Vector spectrum;              // eigenvalues of the shared diagonal Hessian
  std::vector<Vector> noise;    // c_z, recentred so they sum to zero

  // Recentres the noise vectors and checks the zero-sum invariant.
  static QuadraticSaddleSpec create(Vector spectrum, std::vector<Vector> noise);
};

// f_z(x) = 0.5 x^T diag(a) x + c_z^T x. Full gradient is diag(a) x exactly.
FiniteSumProblem make_quadratic_saddle(const QuadraticSaddleSpec& spec);

}  // namespace cnc
