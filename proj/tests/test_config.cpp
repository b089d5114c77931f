#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "cnc/config.hpp"
#include "cnc/rng.hpp"

using namespace cnc;

namespace {

bool has_row(const std::vector<Violation>& v, const std::string& needle) {
  for (const auto& violation : v) {
    if (violation.row.find(needle) != std::string::npos) return true;
  }
  return false;
}

ProblemConstants unit_consts() {
  ProblemConstants c;
  c.L = 1.0;
  c.rho = 5e-4;
  c.l = 1.0;
  c.tau = 0.8;
  c.f_star_gap = 1.0;
  return c;
}

}  // namespace

TEST_CASE("practical mode accepts the benchmark hyperparameters") {
  OptimizerConfig cfg;
  cfg.eta = 0.5;
  cfg.r = 2.0;
  cfg.k_thres = 50;
  cfg.b = 5;
  cfg.n = 40;
  CHECK(validate_config(cfg, unit_consts()).empty());
}

TEST_CASE("theory mode rejects gamma and batch violations by name") {
  ProblemConstants consts = unit_consts();
  double eps = std::pow(0.7, 2.5) / consts.rho;
  OptimizerConfig cfg = derive_theory_params(eps, consts, 16, 2, 0.4, 0.7);
  auto v = validate_config(cfg, consts);
  CHECK(has_row(v, "gamma <= 1/3"));

  OptimizerConfig cfg2 = derive_theory_params(eps, consts, 40, 10, 0.2, 0.7);
  auto v2 = validate_config(cfg2, consts);
  CHECK(has_row(v2, "b <= n/8"));
  OptimizerConfig cfg3 = derive_theory_params(eps, consts, 40, 5, 0.2, 0.7);
  CHECK_FALSE(has_row(validate_config(cfg3, consts), "b <= n/8"));
}

TEST_CASE("derived configs validate cleanly inside the admissible box") {
  Substream s = Rng(2024).stream("box");
  ProblemConstants consts;
  consts.L = 1.0;
  consts.l = 1.0;
  consts.f_star_gap = 1.0;
  for (int trial = 0; trial < 200; ++trial) {
    consts.tau = 0.8 + 0.2 * s.uniform01();
    consts.rho = 1e-5 + 1.9e-4 * s.uniform01();
    double eps_h = 0.75 + 0.15 * s.uniform01();
    double eps = std::pow(eps_h, 2.5) / consts.rho;
    double delta = 0.6 + 0.3 * s.uniform01();
    double gamma = 0.05 + 0.10 * s.uniform01();
    int b = 1 + static_cast<int>(s.next_below(3));
    int n = 8 * b + static_cast<int>(s.next_below(static_cast<std::uint64_t>(4 * b + 1)));
    OptimizerConfig cfg = derive_theory_params(eps, consts, n, b, gamma, delta);
    auto v = validate_config(cfg, consts);
    for (const auto& violation : v) {
      CAPTURE(violation.row);
      CAPTURE(violation.message);
    }
    CHECK(v.empty());
  }
}

TEST_CASE("eps_h scaling law") {
  ProblemConstants consts = unit_consts();
  consts.rho = 1.0;
  OptimizerConfig a = derive_theory_params(0.01, consts, 16, 2, 0.1, 0.5);
  CHECK(a.eps_h == doctest::Approx(0.158489319).epsilon(1e-8));
  OptimizerConfig b = derive_theory_params(0.001, consts, 16, 2, 0.1, 0.5);
  CHECK(b.eps_h / a.eps_h ==
        doctest::Approx(std::pow(10.0, -0.4)).epsilon(1e-12));
}

TEST_CASE("capital C limit and positivity") {
  // As eta -> 0 the bracketed denominator tends to b, so C -> 1.
  CHECK(scsg_capital_c(1e-9, 1.0, 16, 2) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(scsg_capital_c(1e-4, 2.0, 40, 5) > 0.0);
  // A step size too large drives the denominator nonpositive.
  CHECK_THROWS_AS(scsg_capital_c(0.5, 1.0, 40, 5), std::domain_error);
}

TEST_CASE("config files parse key = value lines") {
  const char* path = "test_config_tmp.cfg";
  {
    std::ofstream out(path);
    out << "# benchmark defaults\n";
    out << "eps = 1e-3\n";
    out << "eta = 0.5   # step\n";
    out << "b = 5\n";
    out << "mode = practical\n";
    out << "perturbation_enabled = true\n";
  }
  OptimizerConfig cfg = load_config_file(path);
  CHECK(cfg.eps == 1e-3);
  CHECK(cfg.eta == 0.5);
  CHECK(cfg.b == 5);
  CHECK(cfg.perturbation_enabled);

  {
    std::ofstream out(path);
    out << "bogus_key = 1\n";
  }
  CHECK_THROWS_AS(load_config_file(path), std::runtime_error);
  std::remove(path);
}

TEST_CASE("unknown keys and malformed values are rejected") {
  OptimizerConfig cfg;
  CHECK_THROWS_AS(apply_config_line(cfg, "nope", "1"), std::runtime_error);
  CHECK_THROWS_AS(apply_config_line(cfg, "eps", "abc"), std::runtime_error);
  CHECK_THROWS_AS(apply_config_line(cfg, "mode", "magic"), std::runtime_error);
  apply_config_line(cfg, "mode", "theory");
  CHECK(cfg.mode == Mode::theory);
}
