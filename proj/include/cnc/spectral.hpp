#pragma once

#include <cmath>
#include <optional>

#include "cnc/problem.hpp"
#include "cnc/rng.hpp"

#include <json.hpp>

namespace cnc {

struct SpectralReport {
  double lambda_min = 0.0;
  Vector eigvec;        // unit vector
  double tau = 0.0;     // CNC second moment along eigvec
  int iterations = 0;
  bool converged = false;

  nlohmann::json to_json() const;
};

// Minimum Hessian eigenvalue of f at x via two-phase shifted power
// iteration on Hessian-vector products. Phase one bounds lambda_max with a
// 10% margin; phase two power-iterates mu*I - H. Exhausting max_iter yields
// converged=false with the best estimate, not an exception.
SpectralReport lambda_min_probe(const FiniteSumProblem& p, const Vector& x,
                                double tol, int max_iter, Substream& rng);

inline int default_lambda_min_iters(int d) {
  return static_cast<int>(std::ceil(10.0 * d * std::log(d + 1.0)));
}

// Exact finite-sum CNC estimate tau_hat = (1/n) sum_z <v, grad f_z(x)>^2
// for a unit direction v.
double cnc_estimate(const FiniteSumProblem& p, const Vector& x,
                    const Vector& v);

// F_E(x) = (1/n) sum_z grad f_z grad f_z^T. Errors above the dense cap.
Matrix empirical_fisher(const FiniteSumProblem& p, const Vector& x,
                        int dense_cap = 256);

// Var(x) = (1/n) sum_z (grad f_z - grad f)(grad f_z - grad f)^T.
Matrix grad_covariance(const FiniteSumProblem& p, const Vector& x,
                       int dense_cap = 256);

// Dense Hessian assembled column-by-column from HVPs; testing oracle for
// small d only (d <= 64).
Matrix dense_hessian(const FiniteSumProblem& p, const Vector& x);

}  // namespace cnc
