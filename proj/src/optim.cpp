#include "cnc/optim.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>
#include <string>

namespace cnc {

namespace {

constexpr double kDivergenceNorm = 1e8;

bool finite_ok(const Vector& x) {
  return x.allFinite() && x.norm() <= kDivergenceNorm;
}

Vector initial_point(const FiniteSumProblem& p, const Rng& rng,
                     const std::optional<Vector>& x0) {
  if (x0) {
    if (x0->size() != p.d()) {
      throw std::invalid_argument("initial point has wrong dimension");
    }
    return *x0;
  }
  Substream init = rng.stream("init");
  Vector x(p.d());
  for (int j = 0; j < p.d(); ++j) x[j] = init.normal();
  return x;
}

// Stall rule: the running best objective improved by less than stall_tol
// over the last stall_epochs epochs.
class StallDetector {
 public:
  explicit StallDetector(const OptimizerConfig& cfg)
      : tol_(cfg.stall_tol), window_(cfg.stall_epochs) {}

  void record(double f) {
    double best = bests_.empty() ? f : std::min(bests_.back(), f);
    bests_.push_back(best);
  }

  bool stalled() const {
    if (static_cast<int>(bests_.size()) <= window_) return false;
    double before = bests_[bests_.size() - 1 - window_];
    return before - bests_.back() < tol_;
  }

 private:
  double tol_;
  int window_;
  std::vector<double> bests_;
};

void finish(Trace& tr, std::string reason, std::int64_t ifo,
            double final_grad_norm) {
  tr.reason = std::move(reason);
  tr.total_epochs = static_cast<int>(tr.rows.size());
  tr.total_ifo = ifo;
  tr.final_grad_norm = final_grad_norm;
  for (auto it = tr.rows.rbegin(); it != tr.rows.rend(); ++it) {
    if (it->lambda_min) {
      tr.final_lambda_min = it->lambda_min;
      break;
    }
  }
}

}  // namespace

MethodKind parse_method(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) {
    return c == '-' ? '_' : static_cast<char>(std::tolower(c));
  });
  if (s == "gd") return MethodKind::GD;
  if (s == "sgd") return MethodKind::SGD;
  if (s == "pgd") return MethodKind::PGD;
  if (s == "cnc_gd") return MethodKind::CNC_GD;
  if (s == "cnc_sgd") return MethodKind::CNC_SGD;
  if (s == "scsg") return MethodKind::SCSG;
  if (s == "cnc_scsg") return MethodKind::CNC_SCSG;
  throw std::invalid_argument("unknown method '" + std::string(name) + "'");
}

std::string method_name(MethodKind kind) {
  switch (kind) {
    case MethodKind::GD: return "gd";
    case MethodKind::SGD: return "sgd";
    case MethodKind::PGD: return "pgd";
    case MethodKind::CNC_GD: return "cnc-gd";
    case MethodKind::CNC_SGD: return "cnc-sgd";
    case MethodKind::SCSG: return "scsg";
    case MethodKind::CNC_SCSG: return "cnc-scsg";
  }
  return "?";
}

Vector scsg_direction(const FiniteSumProblem& p, const Vector& x_prev,
                      const Vector& snapshot, const Vector& mu_tilde,
                      std::span<const int> batch) {
  if (batch.empty()) {
    throw std::invalid_argument("scsg_direction: empty minibatch");
  }
  return p.grad_minibatch(x_prev, batch) - p.grad_minibatch(snapshot, batch) +
         mu_tilde;
}

EpochOutcome scsg_epoch(const FiniteSumProblem& p, IterateState& state,
                        double eta, int b, Substream& minibatch,
                        Substream& geometric, IfoConvention conv,
                        const std::function<int()>& geometric_override) {
  if (!state.mu_fresh) {
    throw std::logic_error("scsg_epoch: mu_tilde is stale");
  }
  if (b < 1 || b > p.n()) {
    throw std::invalid_argument("scsg_epoch: need 1 <= b <= n");
  }
  const int n = p.n();
  const double gamma = static_cast<double>(n) / (n + b);
  const int inner_cost = (conv == IfoConvention::paper) ? b : 2 * b;

  int steps = geometric_override ? geometric_override()
                                 : sample_geometric(geometric, gamma);
  EpochOutcome out;
  Vector x = state.x;
  for (int t = 0; t < steps; ++t) {
    std::vector<int> batch = sample_minibatch(minibatch, n, b);
    Vector v = scsg_direction(p, x, state.x, state.mu_tilde, batch);
    state.ifo += inner_cost;
    Vector next = x - eta * v;
    ++out.inner_steps;
    if (!finite_ok(next)) {
      out.diverged = true;
      break;
    }
    x = next;
  }

  state.x = x;  // with N = 0 the snapshot is unchanged
  state.epoch += 1;
  state.t_noise += 1;
  if (!out.diverged) {
    state.mu_tilde = p.grad_full(state.x);
    state.ifo += n;
    state.mu_fresh = true;
  } else {
    state.mu_fresh = false;
  }
  return out;
}

Trace cnc_scsg_run(const FiniteSumProblem& p, const OptimizerConfig& cfg,
                   const Rng& rng, const RunHooks& hooks, IfoConvention conv,
                   std::optional<Vector> x0) {
  if (!(cfg.eta > 0.0)) throw std::invalid_argument("cnc_scsg_run: eta must be > 0");
  if (cfg.perturbation_enabled && !(cfg.r > 0.0)) {
    throw std::invalid_argument("cnc_scsg_run: r must be > 0");
  }
  if (cfg.b < 1 || cfg.b > p.n()) {
    throw std::invalid_argument("cnc_scsg_run: need 1 <= b <= n");
  }

  Substream minibatch = rng.stream("minibatch");
  Substream geometric = rng.stream("geometric");

  IterateState st;
  st.x = initial_point(p, rng, x0);
  st.t_noise = cfg.k_thres;  // no perturbation has ever been taken
  st.mu_tilde = p.grad_full(st.x);
  st.ifo += p.n();
  st.mu_fresh = true;

  Trace tr;
  StallDetector stall(cfg);
  double f_base = 0.0;     // objective when the last escape phase began
  bool escaping = false;

  for (int k = 0; k < cfg.max_epochs; ++k) {
    TraceRow row;
    row.epoch = k;
    row.f = p.eval_full(st.x);
    row.grad_norm = st.mu_tilde.norm();
    if (hooks.probe) {
      auto [lmin, tau] = hooks.probe(k, st.x);
      row.lambda_min = lmin;
      row.tau = tau;
    }
    stall.record(row.f);

    if (cfg.perturbation_enabled && st.t_noise >= cfg.k_thres &&
        row.grad_norm <= cfg.eps) {
      int i = static_cast<int>(minibatch.next_below(p.n()));
      Vector xp = st.x - cfg.r * p.component_grad(st.x, i);
      st.ifo += 1;
      row.perturbed = true;
      if (!finite_ok(xp)) {
        row.ifo = st.ifo;
        tr.rows.push_back(row);
        finish(tr, "divergence", st.ifo, row.grad_norm);
        return tr;
      }
      st.x = xp;
      st.t_noise = 0;
      st.mu_tilde = p.grad_full(st.x);
      st.ifo += p.n();
      f_base = row.f;
      escaping = true;
    }

    EpochOutcome out = scsg_epoch(p, st, cfg.eta, cfg.b, minibatch, geometric,
                                  conv, hooks.geometric_override);
    row.ifo = st.ifo;
    tr.rows.push_back(row);

    if (out.diverged) {
      finish(tr, "divergence", st.ifo, row.grad_norm);
      return tr;
    }
    if (cfg.mode == Mode::theory && escaping && st.t_noise == cfg.k_thres) {
      if (f_base - p.eval_full(st.x) < cfg.f_thres) {
        finish(tr, "f_thres", st.ifo, st.mu_tilde.norm());
        return tr;
      }
      escaping = false;
    }
    if (cfg.mode == Mode::practical && row.grad_norm <= cfg.eps &&
        st.t_noise >= cfg.stall_epochs && stall.stalled()) {
      finish(tr, "stalled", st.ifo, st.mu_tilde.norm());
      return tr;
    }
  }
  finish(tr, "budget", st.ifo,
         st.mu_fresh ? st.mu_tilde.norm()
                     : (tr.rows.empty() ? 0.0 : tr.rows.back().grad_norm));
  return tr;
}

namespace {

Vector escaping_impl(const FiniteSumProblem& p, const Vector& x, int k_thres,
                     double eta, double r, int b, Substream& minibatch,
                     Substream& geometric, std::int64_t& ifo) {
  int i = static_cast<int>(minibatch.next_below(p.n()));
  Vector x0 = x - r * p.component_grad(x, i);
  ifo += 1;
  if (!finite_ok(x0)) throw DivergenceError("escaping: perturbation diverged", x);

  IterateState st;
  st.x = x0;
  st.mu_tilde = p.grad_full(st.x);
  st.ifo = 0;
  st.mu_fresh = true;
  ifo += p.n();
  for (int k = 0; k <= k_thres; ++k) {
    EpochOutcome out =
        scsg_epoch(p, st, eta, b, minibatch, geometric, IfoConvention::paper);
    if (out.diverged) {
      ifo += st.ifo;
      throw DivergenceError("escaping: inner loop diverged at epoch " +
                                std::to_string(k),
                            st.x);
    }
  }
  ifo += st.ifo;
  return st.x;
}

}  // namespace

Vector cnc_scsg_escaping(const FiniteSumProblem& p, const Vector& x,
                         int k_thres, double eta, double r, int b,
                         const Rng& rng) {
  Substream minibatch = rng.stream("minibatch");
  Substream geometric = rng.stream("geometric");
  std::int64_t ifo = 0;
  return escaping_impl(p, x, k_thres, eta, r, b, minibatch, geometric, ifo);
}

PluginAlgorithm scsg_epoch_plugin(int B1, int b1, double eta) {
  if (b1 < 1 || b1 > B1) {
    throw std::invalid_argument("scsg_epoch_plugin: need 1 <= b1 <= B1");
  }
  PluginAlgorithm plugin;
  plugin.ifo_per_epoch_bound = 3.0 * B1;  // B1 + 2 b1 E[N], E[N] = B1/b1
  plugin.step = [B1, b1, eta](const FiniteSumProblem& p, const Vector& x,
                              Substream& minibatch, Substream& geometric,
                              std::int64_t& ifo) {
    if (B1 > p.n()) {
      throw std::invalid_argument("scsg_epoch_plugin: B1 exceeds n");
    }
    std::vector<int> big = sample_minibatch(minibatch, p.n(), B1);
    Vector mu = p.grad_minibatch(x, big);
    ifo += B1;
    double gamma = static_cast<double>(B1) / (B1 + b1);
    int steps = sample_geometric(geometric, gamma);
    Vector xt = x;
    for (int t = 0; t < steps; ++t) {
      std::vector<int> batch = sample_minibatch(minibatch, p.n(), b1);
      Vector v = scsg_direction(p, xt, x, mu, batch);
      ifo += 2 * b1;
      xt -= eta * v;
      if (!finite_ok(xt)) {
        throw DivergenceError("scsg_epoch_plugin: diverged", x);
      }
    }
    return xt;
  };
  return plugin;
}

PluginAlgorithm gd_step_plugin(double eta) {
  PluginAlgorithm plugin;
  plugin.step = [eta](const FiniteSumProblem& p, const Vector& x, Substream&,
                      Substream&, std::int64_t& ifo) {
    Vector y = x - eta * p.grad_full(x);
    ifo += p.n();
    if (!finite_ok(y)) throw DivergenceError("gd_step_plugin: diverged", x);
    return y;
  };
  return plugin;
}

Trace framework_run(const FiniteSumProblem& p, const PluginAlgorithm& plugin,
                    const OptimizerConfig& cfg, const Rng& rng,
                    std::optional<Vector> x0) {
  Substream minibatch = rng.stream("minibatch");
  Substream geometric = rng.stream("geometric");
  Vector x = initial_point(p, rng, x0);
  std::int64_t ifo = 0;
  Trace tr;

  for (int k = 0; k < cfg.max_epochs; ++k) {
    Vector y;
    try {
      y = plugin.step(p, x, minibatch, geometric, ifo);
    } catch (const DivergenceError&) {
      finish(tr, "divergence", ifo,
             tr.rows.empty() ? 0.0 : tr.rows.back().grad_norm);
      return tr;
    }
    if (!finite_ok(y)) {
      finish(tr, "divergence", ifo,
             tr.rows.empty() ? 0.0 : tr.rows.back().grad_norm);
      return tr;
    }
    Vector gy = p.grad_full(y);
    ifo += p.n();  // the first-order condition check

    TraceRow row;
    row.epoch = k;
    row.f = p.eval_full(y);
    row.grad_norm = gy.norm();
    if (row.grad_norm <= cfg.eps_g) {
      row.perturbed = true;  // escape phase invoked
      Vector xn;
      try {
        xn = escaping_impl(p, y, cfg.k_thres, cfg.eta, cfg.r, cfg.b, minibatch,
                           geometric, ifo);
      } catch (const DivergenceError&) {
        row.ifo = ifo;
        tr.rows.push_back(row);
        finish(tr, "divergence", ifo, row.grad_norm);
        return tr;
      }
      row.ifo = ifo;
      tr.rows.push_back(row);
      if (row.f - p.eval_full(xn) <= cfg.f_thres) {
        finish(tr, "f_thres", ifo, row.grad_norm);
        return tr;
      }
      x = xn;
    } else {
      row.ifo = ifo;
      tr.rows.push_back(row);
      x = y;
    }
  }
  finish(tr, "budget", ifo, tr.rows.empty() ? 0.0 : tr.rows.back().grad_norm);
  return tr;
}

std::int64_t first_order_sample_size(double l, double eps, double delta) {
  return static_cast<std::int64_t>(
      std::ceil(2.0 * l * l * (1.0 + std::log(1.0 / delta)) / (eps * eps)));
}

bool first_order_check_sampled(const FiniteSumProblem& p, const Vector& x,
                               double eps, double delta, Substream& rng) {
  if (!(eps > 0.0)) throw std::invalid_argument("first_order_check: eps must be > 0");
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("first_order_check: delta must be in (0,1)");
  }
  if (!p.meta().grad_bound_l) {
    throw std::invalid_argument(
        "first_order_check: gradient bound l unknown; use the exact check");
  }
  std::int64_t size = first_order_sample_size(*p.meta().grad_bound_l, eps, delta);
  if (size >= p.n()) {
    return p.grad_full(x).norm() <= eps;
  }
  Vector acc = Vector::Zero(p.d());
  for (std::int64_t t = 0; t < size; ++t) {
    int z = static_cast<int>(rng.next_below(p.n()));
    acc += p.component_grad(x, z);
  }
  return (acc / static_cast<double>(size)).norm() <= eps / 2.0;
}

Trace baseline_run(const MethodSpec& method, const FiniteSumProblem& p,
                   const OptimizerConfig& cfg, const Rng& rng,
                   const RunHooks& hooks, std::optional<Vector> x0) {
  const MethodKind kind = method.kind;
  if (kind == MethodKind::SCSG || kind == MethodKind::CNC_SCSG) {
    OptimizerConfig c = cfg;
    c.perturbation_enabled = cfg.perturbation_enabled && kind == MethodKind::CNC_SCSG;
    return cnc_scsg_run(p, c, rng, hooks);
  }

  const bool sgd_family = kind == MethodKind::SGD || kind == MethodKind::CNC_SGD;
  const bool gated = kind == MethodKind::PGD || kind == MethodKind::CNC_GD ||
                     kind == MethodKind::CNC_SGD;
  Substream minibatch = rng.stream("minibatch");
  Substream sphere = rng.stream("sphere");
  const int n = p.n();

  Vector x = initial_point(p, rng, x0);
  std::int64_t ifo = 0;
  int t_noise = cfg.k_thres;
  Trace tr;
  StallDetector stall(cfg);

  for (int k = 0; k < cfg.max_epochs; ++k) {
    Vector g = p.grad_full(x);
    if (!sgd_family) ifo += n;  // for SGD methods this is diagnostic only

    TraceRow row;
    row.epoch = k;
    row.f = p.eval_full(x);
    row.grad_norm = g.norm();
    if (hooks.probe) {
      auto [lmin, tau] = hooks.probe(k, x);
      row.lambda_min = lmin;
      row.tau = tau;
    }
    stall.record(row.f);

    if (gated && cfg.perturbation_enabled && t_noise >= cfg.k_thres &&
        row.grad_norm <= cfg.eps) {
      row.perturbed = true;
      t_noise = 0;
      if (kind == MethodKind::PGD) {
        x += sample_sphere(sphere, p.d(), method.pgd_radius);
      } else {
        int i = static_cast<int>(minibatch.next_below(n));
        x -= cfg.r * p.component_grad(x, i);
        ifo += 1;
      }
      if (!finite_ok(x)) {
        row.ifo = ifo;
        tr.rows.push_back(row);
        finish(tr, "divergence", ifo, row.grad_norm);
        return tr;
      }
      g = p.grad_full(x);
      if (!sgd_family) ifo += n;
    }

    bool diverged = false;
    if (sgd_family) {
      for (int j = 0; j < n; ++j) {
        int i = static_cast<int>(minibatch.next_below(n));
        Vector next = x - method.sgd_eta * p.component_grad(x, i);
        ifo += 1;
        if (!finite_ok(next)) {
          diverged = true;
          break;
        }
        x = next;
      }
    } else {
      Vector next = x - cfg.eta * g;
      if (!finite_ok(next)) {
        diverged = true;
      } else {
        x = next;
      }
    }
    t_noise += 1;
    row.ifo = ifo;
    tr.rows.push_back(row);

    if (diverged) {
      finish(tr, "divergence", ifo, row.grad_norm);
      return tr;
    }
    if (cfg.mode == Mode::practical && row.grad_norm <= cfg.eps &&
        t_noise >= cfg.stall_epochs && stall.stalled()) {
      finish(tr, "stalled", ifo, p.grad_full(x).norm());
      return tr;
    }
  }
  finish(tr, "budget", ifo, p.grad_full(x).norm());
  return tr;
}

}  // namespace cnc
