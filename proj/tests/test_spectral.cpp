#include <doctest.h>

#include <cmath>

#include "cnc/problem.hpp"
#include "cnc/spectral.hpp"

using namespace cnc;

namespace {

FiniteSumProblem diag_saddle(std::initializer_list<double> spectrum) {
  Vector a(static_cast<int>(spectrum.size()));
  int j = 0;
  for (double v : spectrum) a[j++] = v;
  std::vector<Vector> noise(2, Vector::Zero(a.size()));
  return make_quadratic_saddle(QuadraticSaddleSpec::create(a, noise));
}

FiniteSumProblem e2split_saddle() {
  Vector a(2);
  a << 1.0, -1.0;
  Vector c(2);
  c << 0.0, 1.0;
  return make_quadratic_saddle(QuadraticSaddleSpec::create(a, {c, -c}));
}

}  // namespace

TEST_CASE("lambda_min on known diagonal spectra") {
  Substream s = Rng(1).stream("spectral");
  FiniteSumProblem p = diag_saddle({2.0, -1.0});
  Vector x = Vector::Zero(2);
  SpectralReport rep = lambda_min_probe(p, x, 1e-8, 100000, s);
  CHECK(rep.converged);
  CHECK(std::abs(rep.lambda_min - (-1.0)) < 1e-6);
  CHECK(std::abs(std::abs(rep.eigvec[1]) - 1.0) < 1e-5);
  CHECK(std::abs(rep.eigvec.norm() - 1.0) < 1e-10);

  FiniteSumProblem pd = diag_saddle({1.0, 1.0});
  SpectralReport rep2 = lambda_min_probe(pd, x, 1e-8, 100000, s);
  CHECK(std::abs(rep2.lambda_min - 1.0) < 1e-6);
}

TEST_CASE("lambda_min on the sigmoid problem matches a dense eigensolve") {
  Dataset data = generate_dataset(40, 4, 7);
  FiniteSumProblem p = make_sigmoid_problem(data, 0.5);
  Substream s = Rng(5).stream("spectral");
  Vector x(4);
  x << 0.3, -0.7, 1.1, 0.2;
  Matrix h = dense_hessian(p, x);
  Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  double exact = es.eigenvalues().minCoeff();
  SpectralReport rep = lambda_min_probe(p, x, 1e-9, 1000000, s);
  CHECK(std::abs(rep.lambda_min - exact) < 1e-6);
}

TEST_CASE("lambda_min exhausting the budget reports converged=false") {
  Substream s = Rng(2).stream("spectral");
  FiniteSumProblem p = diag_saddle({1.0, -1.0, 0.999});
  SpectralReport rep = lambda_min_probe(p, Vector::Zero(3), 1e-12, 3, s);
  CHECK_FALSE(rep.converged);
  CHECK(rep.iterations <= 3);
}

TEST_CASE("cnc_estimate enumerates the finite sum exactly") {
  FiniteSumProblem p = e2split_saddle();
  Vector x = Vector::Zero(2);
  Vector e2(2), e1(2);
  e2 << 0, 1;
  e1 << 1, 0;
  CHECK(cnc_estimate(p, x, e2) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cnc_estimate(p, x, e1) == doctest::Approx(0.0).epsilon(1e-12));

  Vector bad(2);
  bad << 1, 1;
  CHECK_THROWS_AS(cnc_estimate(p, x, bad), std::invalid_argument);

  // All component gradients equal => the estimate collapses to the square
  // of the projected mean gradient.
  FiniteSumProblem noiseless = diag_saddle({1.0, 2.0});
  Vector y(2);
  y << 3.0, -1.0;
  double tau = cnc_estimate(noiseless, y, e1);
  double proj = e1.dot(noiseless.grad_full(y));
  CHECK(tau == doctest::Approx(proj * proj).epsilon(1e-12));
}

TEST_CASE("fisher and covariance identity") {
  Dataset data = generate_dataset(10, 3, 11);
  FiniteSumProblem p = make_sigmoid_problem(data, 0.5);
  Substream s = Rng(6).stream("x");
  for (int trial = 0; trial < 10; ++trial) {
    Vector x(3);
    for (int j = 0; j < 3; ++j) x[j] = 2.0 * s.normal();
    Vector g = p.grad_full(x);
    Matrix lhs = grad_covariance(p, x);
    Matrix rhs = empirical_fisher(p, x) - g * g.transpose();
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);
  }

  FiniteSumProblem saddle = e2split_saddle();
  Vector zero = Vector::Zero(2);
  Matrix fe = empirical_fisher(saddle, zero);
  CHECK((fe - Eigen::DiagonalMatrix<double, 2>(0.0, 1.0).toDenseMatrix())
            .cwiseAbs()
            .maxCoeff() < 1e-14);
  Matrix var = grad_covariance(saddle, zero);
  CHECK((var - fe).cwiseAbs().maxCoeff() < 1e-14);

  // Single component: zero covariance.
  Vector a(2);
  a << 1.0, 1.0;
  auto single = make_quadratic_saddle(
      QuadraticSaddleSpec::create(a, {Vector::Zero(2)}));
  CHECK(grad_covariance(single, zero).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("tau is bounded by the largest Fisher eigenvalue") {
  Dataset data = generate_dataset(12, 4, 13);
  FiniteSumProblem p = make_sigmoid_problem(data, 0.5);
  Substream s = Rng(8).stream("x");
  Vector x(4);
  for (int j = 0; j < 4; ++j) x[j] = s.normal();
  Matrix fe = empirical_fisher(p, x);
  Eigen::SelfAdjointEigenSolver<Matrix> es(fe);
  double lmax = es.eigenvalues().maxCoeff();
  for (int trial = 0; trial < 20; ++trial) {
    Vector v = sample_sphere(s, 4, 1.0);
    CHECK(cnc_estimate(p, x, v) <= lmax + 1e-10);
  }
}

TEST_CASE("dense helpers enforce their size caps") {
  Dataset data = generate_dataset(4, 3, 1);
  FiniteSumProblem p = make_sigmoid_problem(data, 0.1);
  Vector x = Vector::Zero(3);
  CHECK_THROWS_AS(empirical_fisher(p, x, 2), std::invalid_argument);
  CHECK_THROWS_AS(grad_covariance(p, x, 2), std::invalid_argument);
  Matrix h = dense_hessian(p, x);
  CHECK(h.rows() == 3);
  CHECK((h - h.transpose()).cwiseAbs().maxCoeff() < 1e-12);
}
