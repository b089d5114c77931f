#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "cnc/optim.hpp"
#include "cnc/problem.hpp"

using namespace cnc;

namespace {

FiniteSumProblem e2split_saddle() {
  Vector a(2);
  a << 1.0, -1.0;
  Vector c(2);
  c << 0.0, 1.0;
  return make_quadratic_saddle(QuadraticSaddleSpec::create(a, {c, -c}));
}

FiniteSumProblem convex_bowl() {
  Vector a(2);
  a << 1.0, 1.0;
  std::vector<Vector> noise(2, Vector::Zero(2));
  return make_quadratic_saddle(QuadraticSaddleSpec::create(a, noise));
}

// All size-b subsets of {0..n-1}.
void enumerate_subsets(int n, int b, std::vector<std::vector<int>>& out) {
  std::vector<int> mask(n, 0);
  std::fill(mask.end() - b, mask.end(), 1);
  do {
    std::vector<int> subset;
    for (int i = 0; i < n; ++i)
      if (mask[i]) subset.push_back(i);
    out.push_back(subset);
  } while (std::next_permutation(mask.begin(), mask.end()));
}

}  // namespace

TEST_CASE("method names round-trip") {
  for (MethodKind k :
       {MethodKind::GD, MethodKind::SGD, MethodKind::PGD, MethodKind::CNC_GD,
        MethodKind::CNC_SGD, MethodKind::SCSG, MethodKind::CNC_SCSG}) {
    CHECK(parse_method(method_name(k)) == k);
  }
  CHECK(parse_method("CNC-SCSG") == MethodKind::CNC_SCSG);
  CHECK(parse_method("cnc_gd") == MethodKind::CNC_GD);
  CHECK_THROWS_AS(parse_method("adam"), std::invalid_argument);
}

TEST_CASE("variance-reduced direction cancellations") {
  Dataset data = generate_dataset(10, 3, 21);
  FiniteSumProblem p = make_sigmoid_problem(data, 0.5);
  Substream s = Rng(7).stream("x");
  Vector snap(3), x(3);
  for (int j = 0; j < 3; ++j) {
    snap[j] = s.normal();
    x[j] = s.normal();
  }
  Vector mu = p.grad_full(snap);

  std::vector<int> batch = {1, 4, 7};
  Vector same = scsg_direction(p, snap, snap, mu, batch);
  CHECK(same == mu);  // minibatch terms cancel bitwise

  std::vector<int> all(10);
  for (int i = 0; i < 10; ++i) all[i] = i;
  Vector fullv = scsg_direction(p, x, snap, mu, all);
  CHECK((fullv - p.grad_full(x)).norm() < 1e-14);

  std::vector<int> empty;
  CHECK_THROWS_AS(scsg_direction(p, x, snap, mu, empty),
                  std::invalid_argument);
}

TEST_CASE("direction is unbiased and variance-bounded under enumeration") {
  Dataset data = generate_dataset(6, 3, 33);
  FiniteSumProblem p = make_sigmoid_problem(data, 0.5);
  const double L = p.meta().smoothness_L;
  Substream s = Rng(17).stream("x");
  std::vector<std::vector<int>> subsets;
  const int b = 2;
  enumerate_subsets(6, b, subsets);

  for (int trial = 0; trial < 5; ++trial) {
    Vector snap(3), x(3);
    for (int j = 0; j < 3; ++j) {
      snap[j] = s.normal();
      x[j] = s.normal();
    }
    Vector mu = p.grad_full(snap);
    Vector g = p.grad_full(x);
    Vector mean = Vector::Zero(3);
    double second = 0.0;
    for (const auto& subset : subsets) {
      Vector v = scsg_direction(p, x, snap, mu, subset);
      mean += v;
      second += (v - g).squaredNorm();
    }
    mean /= static_cast<double>(subsets.size());
    second /= static_cast<double>(subsets.size());
    CHECK((mean - g).norm() < 1e-12);
    CHECK(second <= L * L / b * (x - snap).squaredNorm() + 1e-12);
  }
}

TEST_CASE("scsg_epoch with a forced zero-length inner loop") {
  FiniteSumProblem p = convex_bowl();
  Rng rng(3);
  Substream mb = rng.stream("minibatch");
  Substream geo = rng.stream("geometric");
  IterateState st;
  st.x = Vector::Constant(2, 1.0);
  st.mu_tilde = p.grad_full(st.x);
  st.mu_fresh = true;
  st.t_noise = 4;
  Vector before = st.x;
  auto out = scsg_epoch(p, st, 0.5, 1, mb, geo, IfoConvention::paper,
                        [] { return 0; });
  CHECK(out.inner_steps == 0);
  CHECK(st.x == before);
  CHECK(st.t_noise == 5);
  CHECK(st.epoch == 1);
}

TEST_CASE("scsg_epoch reduces to exact gradient descent without noise") {
  // With zero gradient noise the direction equals the full gradient, so each
  // inner step contracts x by (1 - eta) = 0.5 on the bowl.
  FiniteSumProblem p = convex_bowl();
  Rng rng(4);
  Substream mb = rng.stream("minibatch");
  Substream geo = rng.stream("geometric");
  IterateState st;
  st.x = Vector::Constant(2, 1.0);
  st.mu_tilde = p.grad_full(st.x);
  st.mu_fresh = true;
  const int steps = 3;
  scsg_epoch(p, st, 0.5, 1, mb, geo, IfoConvention::paper,
             [steps] { return steps; });
  CHECK((st.x - Vector::Constant(2, std::pow(0.5, steps))).norm() < 1e-14);
  CHECK((st.mu_tilde - p.grad_full(st.x)).norm() == 0.0);
}

TEST_CASE("scsg_epoch demands a fresh snapshot gradient") {
  FiniteSumProblem p = convex_bowl();
  Rng rng(5);
  Substream mb = rng.stream("minibatch");
  Substream geo = rng.stream("geometric");
  IterateState st;
  st.x = Vector::Zero(2);
  st.mu_tilde = Vector::Zero(2);
  st.mu_fresh = false;
  CHECK_THROWS_AS(
      scsg_epoch(p, st, 0.5, 1, mb, geo, IfoConvention::paper),
      std::logic_error);
}

TEST_CASE("ifo accounting matches the per-epoch formula exactly") {
  FiniteSumProblem p = convex_bowl();
  const int n = p.n();
  const int b = 1;
  std::vector<int> forced = {3, 0, 5, 2};
  std::size_t next = 0;
  Rng rng(6);
  Substream mb = rng.stream("minibatch");
  Substream geo = rng.stream("geometric");
  IterateState st;
  st.x = Vector::Constant(2, 0.5);
  st.mu_tilde = p.grad_full(st.x);
  st.ifo = n;
  st.mu_fresh = true;
  std::int64_t expected = n;
  for (int k = 0; k < 4; ++k) {
    scsg_epoch(p, st, 0.1, b, mb, geo, IfoConvention::paper,
               [&] { return forced[next++]; });
    expected += n + static_cast<std::int64_t>(b) * forced[k];
    CHECK(st.ifo == expected);
  }

  // Strict accounting counts both minibatch gradients per inner step.
  IterateState st2;
  st2.x = Vector::Constant(2, 0.5);
  st2.mu_tilde = p.grad_full(st2.x);
  st2.mu_fresh = true;
  scsg_epoch(p, st2, 0.1, b, mb, geo, IfoConvention::strict, [] { return 4; });
  CHECK(st2.ifo == n + 2 * b * 4);
}

TEST_CASE("cnc_scsg_run gating invariants") {
  Dataset data = generate_dataset(10, 2, 77);
  FiniteSumProblem p = make_sigmoid_problem(data, 0.5);
  OptimizerConfig cfg;
  cfg.mode = Mode::theory;
  cfg.eps = 10.0;  // gradient is always small enough to perturb
  cfg.eta = 0.3;
  cfg.r = 0.1;
  cfg.b = 2;
  cfg.k_thres = 4;
  cfg.f_thres = -1e300;  // never triggers the theory stop
  cfg.max_epochs = 30;
  Trace tr = cnc_scsg_run(p, cfg, Rng(12));
  std::vector<int> perturbed;
  for (const auto& row : tr.rows) {
    if (row.perturbed) {
      CHECK(row.grad_norm <= cfg.eps);
      perturbed.push_back(row.epoch);
    }
  }
  REQUIRE(perturbed.size() >= 2);
  CHECK(perturbed.front() == 0);  // eligible immediately at the start
  for (std::size_t i = 1; i < perturbed.size(); ++i) {
    CHECK(perturbed[i] - perturbed[i - 1] >= cfg.k_thres);
  }
  // Cumulative IFO never decreases and epochs strictly increase.
  for (std::size_t i = 1; i < tr.rows.size(); ++i) {
    CHECK(tr.rows[i].ifo >= tr.rows[i - 1].ifo);
    CHECK(tr.rows[i].epoch == tr.rows[i - 1].epoch + 1);
  }
}

TEST_CASE("perturbation never fires while the gradient is large") {
  FiniteSumProblem p = convex_bowl();
  OptimizerConfig cfg;
  cfg.eps = 1e-12;
  cfg.eta = 0.2;
  cfg.r = 1.0;
  cfg.b = 1;
  cfg.k_thres = 0;
  cfg.max_epochs = 10;
  cfg.stall_tol = 1e-300;  // keep running the full budget
  Vector x0 = Vector::Constant(2, 5.0);
  Trace tr = cnc_scsg_run(p, cfg, Rng(2), {}, IfoConvention::paper, x0);
  for (const auto& row : tr.rows) CHECK_FALSE(row.perturbed);
}

TEST_CASE("noiseless stationary start with perturbations off is constant") {
  FiniteSumProblem p = convex_bowl();  // gradient noise is exactly zero
  OptimizerConfig cfg;
  cfg.eta = 0.5;
  cfg.b = 1;
  cfg.max_epochs = 20;
  cfg.stall_epochs = 100;  // never enough history to stall
  cfg.perturbation_enabled = false;
  Trace tr = cnc_scsg_run(p, cfg, Rng(8), {}, IfoConvention::paper,
                          Vector::Zero(2));
  CHECK(tr.rows.size() == 20);
  for (const auto& row : tr.rows) {
    CHECK(row.f == 0.0);
    CHECK(row.grad_norm == 0.0);
  }
}

TEST_CASE("divergence aborts with a report") {
  FiniteSumProblem p = e2split_saddle();
  OptimizerConfig cfg;
  cfg.eta = 0.5;
  cfg.r = 2.0;
  cfg.b = 1;
  cfg.k_thres = 0;
  cfg.eps = 1e-3;
  cfg.max_epochs = 200;
  Trace tr = cnc_scsg_run(p, cfg, Rng(1), {}, IfoConvention::paper,
                          Vector::Zero(2));
  CHECK(tr.reason == "divergence");
  for (const auto& row : tr.rows) CHECK(std::isfinite(row.f));
}

TEST_CASE("escaping with zero step and zero noise is the identity") {
  FiniteSumProblem p = convex_bowl();
  Vector x = Vector::Zero(2);
  Vector y = cnc_scsg_escaping(p, x, 3, 0.1, 0.0, 1, Rng(5));
  CHECK(y == x);
}

TEST_CASE("escaping decreases the objective at a strict saddle") {
  FiniteSumProblem p = e2split_saddle();
  Vector x = Vector::Zero(2);
  std::vector<double> decreases;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Vector y = cnc_scsg_escaping(p, x, 25, 0.1, 0.1, 1, Rng(seed));
    decreases.push_back(p.eval_full(x) - p.eval_full(y));
  }
  std::sort(decreases.begin(), decreases.end());
  CHECK(decreases[25] > 0.0);
}

TEST_CASE("framework terminates via the decrease rule on a convex bowl") {
  FiniteSumProblem p = convex_bowl();
  OptimizerConfig cfg;
  cfg.eps_g = 1e-3;
  cfg.eta = 0.3;
  cfg.r = 0.5;
  cfg.b = 1;
  cfg.k_thres = 2;
  cfg.f_thres = 1e-6;
  cfg.max_epochs = 200;
  Trace tr = framework_run(p, gd_step_plugin(0.5), cfg, Rng(3),
                           Vector::Constant(2, 1.0));
  CHECK(tr.reason == "f_thres");
  CHECK(tr.final_grad_norm <= cfg.eps_g);

  // An infinite decrease threshold stops at the first stationary epoch.
  cfg.f_thres = std::numeric_limits<double>::infinity();
  Trace tr2 = framework_run(p, gd_step_plugin(0.5), cfg, Rng(3),
                            Vector::Constant(2, 1.0));
  CHECK(tr2.reason == "f_thres");
  CHECK(tr2.total_epochs <= tr.total_epochs);
}

TEST_CASE("framework with the SCSG plugin certifies the saddle problem") {
  Dataset data = generate_dataset(20, 3, 55);
  FiniteSumProblem p = make_sigmoid_problem(data, 0.5);
  OptimizerConfig cfg;
  cfg.eps_g = 1e-2;
  cfg.eta = 0.3;
  cfg.r = 0.5;
  cfg.b = 2;
  cfg.k_thres = 3;
  cfg.f_thres = 1e-7;
  cfg.max_epochs = 500;
  Trace tr = framework_run(p, scsg_epoch_plugin(20, 2, 0.3), cfg, Rng(9));
  CHECK(tr.reason == "f_thres");
  CHECK(tr.final_grad_norm <= cfg.eps_g);
}

TEST_CASE("plugin geometric mean matches the closed form") {
  Rng rng(44);
  Substream geo = rng.stream("geometric");
  double sum = 0.0;
  const int draws = 100000;
  for (int t = 0; t < draws; ++t) {
    sum += sample_geometric(geo, 40.0 / (40 + 10));
  }
  CHECK(sum / draws == doctest::Approx(4.0).epsilon(0.01));
  CHECK_THROWS_AS(scsg_epoch_plugin(2, 3, 0.1), std::invalid_argument);
}

TEST_CASE("sampled first-order check sizes and behavior") {
  CHECK(first_order_sample_size(2.0, 0.1, 0.05) == 3197);

  // Capped at n: exact check at a true stationary point.
  FiniteSumProblem p = convex_bowl();
  Substream s = Rng(2).stream("check");
  CHECK(first_order_check_sampled(p, Vector::Zero(2), 1e-6, 0.1, s));
  CHECK_FALSE(
      first_order_check_sampled(p, Vector::Constant(2, 1.0), 1e-6, 0.1, s));

  // Unknown gradient bound is an error.
  FiniteSumProblem anon(2, 1, [](const Vector&, int) { return 0.0; },
                        [](const Vector&, int) { return Vector::Zero(1); },
                        [](const Vector&, int, const Vector&) {
                          return Vector::Zero(1);
                        },
                        ProblemMeta{});
  CHECK_THROWS_AS(first_order_check_sampled(anon, Vector::Zero(1), 0.1, 0.1, s),
                  std::invalid_argument);
}

TEST_CASE("gd baseline contracts the bowl in closed form") {
  FiniteSumProblem p = convex_bowl();
  OptimizerConfig cfg;
  cfg.eta = 0.5;
  cfg.b = 1;
  cfg.max_epochs = 3;
  cfg.stall_tol = 1e-300;
  MethodSpec gd;
  gd.kind = MethodKind::GD;
  Trace tr = baseline_run(gd, p, cfg, Rng(1), {}, Vector::Constant(2, 1.0));
  REQUIRE(tr.rows.size() == 3);
  CHECK(tr.rows[0].f == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(tr.rows[1].f == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(tr.rows[2].f == doctest::Approx(0.0625).epsilon(1e-14));
}

TEST_CASE("pgd and cnc-gd perturb at a flat start") {
  FiniteSumProblem p = e2split_saddle();
  OptimizerConfig cfg;
  cfg.eta = 0.5;
  cfg.r = 2.0;
  cfg.eps = 1e-3;
  cfg.k_thres = 50;
  cfg.b = 1;
  cfg.max_epochs = 5;
  cfg.stall_tol = 1e-300;
  for (MethodKind kind : {MethodKind::PGD, MethodKind::CNC_GD}) {
    MethodSpec m;
    m.kind = kind;
    Trace tr = baseline_run(m, p, cfg, Rng(4), {}, Vector::Zero(2));
    REQUIRE(!tr.rows.empty());
    CHECK(tr.rows[0].perturbed);
    CHECK(tr.rows[0].f == 0.0);
  }

  MethodSpec gd;
  gd.kind = MethodKind::GD;
  Trace tr = baseline_run(gd, p, cfg, Rng(4), {}, Vector::Zero(2));
  for (const auto& row : tr.rows) {
    CHECK(row.f == 0.0);  // exact stationary point, no perturbation path
    CHECK_FALSE(row.perturbed);
  }
}
