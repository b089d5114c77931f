#include "cnc/problem.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace cnc {

namespace {

double sigmoid(double u) { return 1.0 / (1.0 + std::exp(-u)); }

// Numeric bounds on |sigmoid''| and |regularizer'''| over a dense grid;
// used only for metadata constants, not in any oracle.
double max_abs_sigmoid_d2() {
  double best = 0.0;
  for (double u = -20.0; u <= 20.0; u += 1e-3) {
    double s = sigmoid(u);
    best = std::max(best, std::abs(s * (1.0 - s) * (1.0 - 2.0 * s)));
  }
  return best;
}

double max_abs_sigmoid_d3() {
  double best = 0.0;
  for (double u = -20.0; u <= 20.0; u += 1e-3) {
    double s = sigmoid(u);
    double sp = s * (1.0 - s);
    best = std::max(best, std::abs(sp * (6.0 * s * s - 6.0 * s + 1.0)));
  }
  return best;
}

double max_abs_reg_d3() {
  double best = 0.0;
  for (double x = -5.0; x <= 5.0; x += 1e-4) {
    double q = 1.0 + x * x;
    best = std::max(best, std::abs(24.0 * x * (x * x - 1.0) / (q * q * q * q)));
  }
  return best;
}

}  // namespace

FiniteSumProblem::FiniteSumProblem(int n, int d, ValueFn value, GradFn grad,
                                   HvpFn hvp, ProblemMeta meta)
    : n_(n), d_(d), value_(std::move(value)), grad_(std::move(grad)),
      hvp_(std::move(hvp)), meta_(std::move(meta)) {
  if (n_ < 1 || d_ < 1) {
    throw std::invalid_argument("FiniteSumProblem: n and d must be positive");
  }
}

void FiniteSumProblem::check_point(const Vector& x) const {
  if (x.size() != d_) {
    throw std::invalid_argument("point has dimension " +
                                std::to_string(x.size()) + ", expected " +
                                std::to_string(d_));
  }
  if (!x.allFinite()) {
    throw std::invalid_argument("point has non-finite entries");
  }
}

void FiniteSumProblem::check_index(int z) const {
  if (z < 0 || z >= n_) {
    throw std::out_of_range("component index " + std::to_string(z) +
                            " out of range [0, " + std::to_string(n_) + ")");
  }
}

double FiniteSumProblem::component_value(const Vector& x, int z) const {
  check_point(x);
  check_index(z);
  ifo_calls_.fetch_add(1, std::memory_order_relaxed);
  return value_(x, z);
}

Vector FiniteSumProblem::component_grad(const Vector& x, int z) const {
  check_point(x);
  check_index(z);
  ifo_calls_.fetch_add(1, std::memory_order_relaxed);
  return grad_(x, z);
}

Vector FiniteSumProblem::component_hvp(const Vector& x, int z,
                                       const Vector& v) const {
  check_point(x);
  check_index(z);
  if (!v.allFinite() || v.size() != d_) {
    throw std::invalid_argument("hvp direction invalid");
  }
  hvp_calls_.fetch_add(1, std::memory_order_relaxed);
  return hvp_(x, z, v);
}

double FiniteSumProblem::eval_full(const Vector& x) const {
  double acc = 0.0;
  for (int z = 0; z < n_; ++z) acc += component_value(x, z);
  return acc / n_;
}

Vector FiniteSumProblem::grad_full(const Vector& x) const {
  Vector acc = Vector::Zero(d_);
  for (int z = 0; z < n_; ++z) acc += component_grad(x, z);
  return acc / n_;
}

Vector FiniteSumProblem::grad_minibatch(const Vector& x,
                                        std::span<const int> indices) const {
  if (indices.empty()) {
    throw std::invalid_argument("grad_minibatch: empty index set");
  }
  Vector acc = Vector::Zero(d_);
  for (int z : indices) acc += component_grad(x, z);
  return acc / static_cast<double>(indices.size());
}

Vector FiniteSumProblem::hvp_full(const Vector& x, const Vector& v) const {
  Vector acc = Vector::Zero(d_);
  for (int z = 0; z < n_; ++z) acc += component_hvp(x, z, v);
  return acc / n_;
}

void FiniteSumProblem::reset_counters() const {
  ifo_calls_.store(0, std::memory_order_relaxed);
  hvp_calls_.store(0, std::memory_order_relaxed);
}

Dataset generate_dataset(int n, int d, std::uint64_t seed) {
  if (n < 1 || d < 1) {
    throw std::invalid_argument("generate_dataset: n and d must be positive");
  }
  if (n % 2 != 0) {
    throw std::invalid_argument("generate_dataset: n must be even, got " +
                                std::to_string(n));
  }
  Dataset data;
  data.n = n;
  data.d = d;
  data.seed = seed;
  data.features.resize(n, d);
  data.labels.resize(n);
  Substream s = Rng(seed).stream("dataset");
  for (int i = 0; i < n; ++i) {
    double mean = (i < n / 2) ? 0.0 : 1.0;
    data.labels[i] = (i < n / 2) ? 0 : 1;
    for (int j = 0; j < d; ++j) data.features(i, j) = mean + s.normal();
  }
  return data;
}

void Dataset::write_csv(std::ostream& out) const {
  out << "y";
  for (int j = 1; j <= d; ++j) out << ",z_" << j;
  out << "\n";
  out << std::setprecision(17);
  for (int i = 0; i < n; ++i) {
    out << labels[i];
    for (int j = 0; j < d; ++j) out << "," << features(i, j);
    out << "\n";
  }
}

FiniteSumProblem make_sigmoid_problem(const Dataset& data, double lambda,
                                      bool remap_labels) {
  if (lambda < 0.0) {
    throw std::invalid_argument("make_sigmoid_problem: lambda must be >= 0");
  }
  const int n = data.n;
  const int d = data.d;
  Matrix Z = data.features;
  Vector y(n);
  for (int i = 0; i < n; ++i) {
    y[i] = remap_labels ? (data.labels[i] == 0 ? -1.0 : 1.0)
                        : static_cast<double>(data.labels[i]);
  }

  auto reg_value = [lambda, d](const Vector& x) {
    double acc = 0.0;
    for (int j = 0; j < d; ++j) acc += x[j] * x[j] / (1.0 + x[j] * x[j]);
    return lambda * acc;
  };
  auto value = [Z, y, reg_value](const Vector& x, int z) {
    return sigmoid(y[z] * Z.row(z).dot(x)) + reg_value(x);
  };
  auto grad = [Z, y, lambda, d](const Vector& x, int z) {
    double u = y[z] * Z.row(z).dot(x);
    double s = sigmoid(u);
    Vector g = (s * (1.0 - s) * y[z]) * Z.row(z).transpose();
    for (int j = 0; j < d; ++j) {
      double q = 1.0 + x[j] * x[j];
      g[j] += lambda * 2.0 * x[j] / (q * q);
    }
    return g;
  };
  auto hvp = [Z, y, lambda, d](const Vector& x, int z, const Vector& v) {
    double u = y[z] * Z.row(z).dot(x);
    double s = sigmoid(u);
    double d2 = s * (1.0 - s) * (1.0 - 2.0 * s);
    Vector h = (d2 * y[z] * y[z] * Z.row(z).dot(v)) * Z.row(z).transpose();
    for (int j = 0; j < d; ++j) {
      double q = 1.0 + x[j] * x[j];
      h[j] += lambda * 2.0 * (1.0 - 3.0 * x[j] * x[j]) / (q * q * q) * v[j];
    }
    return h;
  };

  double max_row_sq = 0.0;
  double max_row = 0.0;
  for (int i = 0; i < n; ++i) {
    double nr = Z.row(i).norm();
    max_row = std::max(max_row, nr);
    max_row_sq = std::max(max_row_sq, nr * nr);
  }

  ProblemMeta meta;
  meta.smoothness_L = max_abs_sigmoid_d2() * max_row_sq + 2.0 * lambda;
  meta.hessian_lipschitz_rho =
      max_abs_sigmoid_d3() * max_row * max_row_sq + lambda * max_abs_reg_d3();

  // The gradient bound is not stated for this objective; estimate it as the
  // max over 1e4 random (x, z) draws with ||x|| <= 10.
  {
    Substream s = Rng(0x9b05eed0ULL).stream("lbound");
    double best = 0.0;
    for (int trial = 0; trial < 10000; ++trial) {
      Eigen::VectorXd dir = sample_sphere(s, d, 1.0);
      double radius = 10.0 * std::pow(s.uniform01(), 1.0 / d);
      Vector x = radius * dir;
      int z = static_cast<int>(s.next_below(n));
      best = std::max(best, grad(x, z).norm());
    }
    meta.grad_bound_l = best;
    meta.grad_bound_box = "empirical max over 1e4 draws with ||x|| <= 10";
  }

  return FiniteSumProblem(n, d, value, grad, hvp, std::move(meta));
}

QuadraticSaddleSpec QuadraticSaddleSpec::create(Vector spectrum,
                                                std::vector<Vector> noise) {
  if (spectrum.size() < 1) {
    throw std::invalid_argument("QuadraticSaddleSpec: empty spectrum");
  }
  if (noise.empty()) {
    throw std::invalid_argument("QuadraticSaddleSpec: need at least one component");
  }
  const int d = static_cast<int>(spectrum.size());
  Vector mean = Vector::Zero(d);
  for (const Vector& c : noise) {
    if (c.size() != d) {
      throw std::invalid_argument("QuadraticSaddleSpec: noise dimension mismatch");
    }
    mean += c;
  }
  mean /= static_cast<double>(noise.size());
  for (Vector& c : noise) c -= mean;

  Vector check = Vector::Zero(d);
  for (const Vector& c : noise) check += c;
  if (check.lpNorm<Eigen::Infinity>() > 1e-9 * noise.size()) {
    throw std::runtime_error("QuadraticSaddleSpec: noise does not sum to zero after recentring");
  }
  return QuadraticSaddleSpec{std::move(spectrum), std::move(noise)};
}

FiniteSumProblem make_quadratic_saddle(const QuadraticSaddleSpec& spec) {
  const int d = static_cast<int>(spec.spectrum.size());
  const int n = static_cast<int>(spec.noise.size());
  Vector a = spec.spectrum;
  std::vector<Vector> c = spec.noise;

  auto value = [a, c](const Vector& x, int z) {
    return 0.5 * x.dot(a.cwiseProduct(x)) + c[z].dot(x);
  };
  auto grad = [a, c](const Vector& x, int z) -> Vector {
    return a.cwiseProduct(x) + c[z];
  };
  auto hvp = [a](const Vector& x, int z, const Vector& v) -> Vector {
    (void)x;
    (void)z;
    return a.cwiseProduct(v);
  };

  double max_abs_a = a.cwiseAbs().maxCoeff();
  double max_c = 0.0;
  for (const Vector& cz : c) max_c = std::max(max_c, cz.norm());

  ProblemMeta meta;
  meta.smoothness_L = max_abs_a;
  meta.hessian_lipschitz_rho = 0.0;
  meta.grad_bound_l = max_abs_a * 10.0 + max_c;
  meta.grad_bound_box = "exact bound over ||x|| <= 10";

  return FiniteSumProblem(n, d, value, grad, hvp, std::move(meta));
}

}  // namespace cnc
