#include "cnc/spectral.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace cnc {

nlohmann::json SpectralReport::to_json() const {
  return nlohmann::json{{"lambda_min", lambda_min},
                        {"tau", tau},
                        {"converged", converged},
                        {"iters", iterations}};
}

namespace {

void check_finite(const Vector& w) {
  if (!w.allFinite()) {
    throw std::runtime_error("spectral: non-finite Hessian-vector product");
  }
}

}  // namespace

SpectralReport lambda_min_probe(const FiniteSumProblem& p, const Vector& x,
                                double tol, int max_iter, Substream& rng) {
  if (!(tol > 0.0)) throw std::invalid_argument("lambda_min: tol must be > 0");
  if (max_iter < 1) throw std::invalid_argument("lambda_min: max_iter must be >= 1");
  const int d = p.d();
  int iters = 0;

  // Phase one: bound the spectral radius. Power iteration on H converges to
  // the eigenvalue of largest magnitude; its absolute value dominates
  // lambda_max, so mu = 1.1 * |estimate| shifts H below zero.
  Vector v = sample_sphere(rng, d, 1.0);
  double dominant = 0.0;
  int phase1 = std::min(max_iter, 100);
  for (int t = 0; t < phase1; ++t) {
    Vector w = p.hvp_full(x, v);
    check_finite(w);
    ++iters;
    double rq = v.dot(w);
    double wn = w.norm();
    if (wn < 1e-300) break;  // H annihilates v; radius estimate stays 0
    v = w / wn;
    if (std::abs(rq - dominant) <= 1e-10 * (1.0 + std::abs(rq))) {
      dominant = rq;
      break;
    }
    dominant = rq;
  }
  double mu = 1.1 * std::abs(dominant) + tol;

  // Phase two: power-iterate B = mu*I - H; its top eigenvector is the
  // eigenvector of lambda_min(H).
  SpectralReport report;
  bool restarted = false;
  v = sample_sphere(rng, d, 1.0);
  double rq = 0.0;
  double prev_rq = std::numeric_limits<double>::infinity();
  int stagnant = 0;
  while (iters < max_iter) {
    Vector hv = p.hvp_full(x, v);
    check_finite(hv);
    ++iters;
    rq = v.dot(hv);
    double resid = (hv - rq * v).norm();
    if (resid <= tol) {
      report.converged = true;
      break;
    }
    if (std::abs(rq - prev_rq) < 1e-14 * (1.0 + std::abs(rq))) {
      if (++stagnant >= 20) {
        if (restarted) break;
        restarted = true;
        stagnant = 0;
        v = sample_sphere(rng, d, 1.0);
        prev_rq = std::numeric_limits<double>::infinity();
        continue;
      }
    } else {
      stagnant = 0;
    }
    prev_rq = rq;
    Vector bv = mu * v - hv;
    double bn = bv.norm();
    if (bn < 1e-300) break;  // v is an exact eigenvector of B with value 0
    v = bv / bn;
  }

  report.lambda_min = rq;
  report.eigvec = v;
  report.iterations = iters;
  report.tau = cnc_estimate(p, x, v);
  return report;
}

double cnc_estimate(const FiniteSumProblem& p, const Vector& x,
                    const Vector& v) {
  if (std::abs(v.norm() - 1.0) > 1e-8) {
    throw std::invalid_argument("cnc_estimate: direction must be a unit vector");
  }
  double acc = 0.0;
  for (int z = 0; z < p.n(); ++z) {
    double proj = v.dot(p.component_grad(x, z));
    acc += proj * proj;
  }
  return acc / p.n();
}

namespace {

void check_dense_cap(int d, int cap) {
  if (d > cap) {
    throw std::invalid_argument(
        "dense matrix dimension " + std::to_string(d) + " exceeds cap " +
        std::to_string(cap) + "; use HVP-based probes instead");
  }
}

}  // namespace

Matrix empirical_fisher(const FiniteSumProblem& p, const Vector& x,
                        int dense_cap) {
  check_dense_cap(p.d(), dense_cap);
  Matrix f = Matrix::Zero(p.d(), p.d());
  for (int z = 0; z < p.n(); ++z) {
    Vector g = p.component_grad(x, z);
    f.noalias() += g * g.transpose();
  }
  return f / p.n();
}

Matrix grad_covariance(const FiniteSumProblem& p, const Vector& x,
                       int dense_cap) {
  check_dense_cap(p.d(), dense_cap);
  Vector mean = p.grad_full(x);
  Matrix c = Matrix::Zero(p.d(), p.d());
  for (int z = 0; z < p.n(); ++z) {
    Vector g = p.component_grad(x, z) - mean;
    c.noalias() += g * g.transpose();
  }
  return c / p.n();
}

Matrix dense_hessian(const FiniteSumProblem& p, const Vector& x) {
  if (p.d() > 64) {
    throw std::invalid_argument("dense_hessian: oracle limited to d <= 64");
  }
  Matrix h(p.d(), p.d());
  for (int j = 0; j < p.d(); ++j) {
    Vector e = Vector::Zero(p.d());
    e[j] = 1.0;
    h.col(j) = p.hvp_full(x, e);
  }
  return h;
}

}  // namespace cnc
