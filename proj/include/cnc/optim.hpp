#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "cnc/config.hpp"
#include "cnc/problem.hpp"
#include "cnc/rng.hpp"
#include "cnc/trace.hpp"

namespace cnc {

enum class MethodKind { GD, SGD, PGD, CNC_GD, CNC_SGD, SCSG, CNC_SCSG };

MethodKind parse_method(std::string_view name);
std::string method_name(MethodKind kind);

// paper: one minibatch gradient per inner step (n + b N_k per epoch).
// strict: both minibatch evaluations are counted (n + 2b N_k).
enum class IfoConvention { paper, strict };

// Method knobs that live outside OptimizerConfig. eta, r, the perturbation
// gap (k_thres), eps and b come from the config.
struct MethodSpec {
  MethodKind kind = MethodKind::CNC_SCSG;
  double pgd_radius = 0.05;
  double sgd_eta = 2.0;  // base step for the SGD / CNC-SGD methods
};

struct IterateState {
  Vector x;         // current snapshot
  Vector mu_tilde;  // full gradient at the snapshot
  bool mu_fresh = false;
  int epoch = 0;
  int t_noise = 0;  // epochs since the last perturbation
  std::int64_t ifo = 0;
};

struct RunHooks {
  // Optional spectral probe, called on the epoch-start snapshot. Returns
  // (lambda_min, tau) to attach to the trace row. Must not mutate state.
  std::function<std::pair<std::optional<double>, std::optional<double>>(
      int epoch, const Vector& x)>
      probe;
  // Test stub replacing the geometric inner-loop-length draw.
  std::function<int()> geometric_override;
};

// Thrown when an iterate leaves the finite region; carries the last finite
// point.
struct DivergenceError : std::runtime_error {
  DivergenceError(std::string msg, Vector last)
      : std::runtime_error(std::move(msg)), last_finite(std::move(last)) {}
  Vector last_finite;
};

// Variance-reduced direction grad_I(x_prev) - grad_I(snapshot) + mu_tilde.
Vector scsg_direction(const FiniteSumProblem& p, const Vector& x_prev,
                      const Vector& snapshot, const Vector& mu_tilde,
                      std::span<const int> batch);

struct EpochOutcome {
  int inner_steps = 0;
  bool diverged = false;
};

// One SCSG epoch: draws N ~ Geom(n/(n+b)), runs N variance-reduced inner
// steps, moves the snapshot to the final iterate and refreshes mu_tilde.
// Increments t_noise. On divergence the state keeps the last finite point.
EpochOutcome scsg_epoch(const FiniteSumProblem& p, IterateState& state,
                        double eta, int b, Substream& minibatch,
                        Substream& geometric, IfoConvention conv,
                        const std::function<int()>& geometric_override = {});

// Algorithm: full CNC-SCSG loop with perturbation gating and the practical
// or theory-mode stopping rule. x0 defaults to N(0, I) from the init
// substream.
Trace cnc_scsg_run(const FiniteSumProblem& p, const OptimizerConfig& cfg,
                   const Rng& rng, const RunHooks& hooks = {},
                   IfoConvention conv = IfoConvention::paper,
                   std::optional<Vector> x0 = std::nullopt);

// One SGD perturbation followed by exactly k_thres + 1 SCSG epochs.
// Throws DivergenceError on blow-up.
Vector cnc_scsg_escaping(const FiniteSumProblem& p, const Vector& x,
                         int k_thres, double eta, double r, int b,
                         const Rng& rng);

// Epoch-based first-order algorithm plugged into the generic framework.
struct PluginAlgorithm {
  std::function<Vector(const FiniteSumProblem& p, const Vector& x,
                       Substream& minibatch, Substream& geometric,
                       std::int64_t& ifo)>
      step;
  double ifo_per_epoch_bound = 0.0;
};

// One SCSG epoch with snapshot batch B1 and inner batch b1;
// N ~ Geom(B1/(B1+b1)).
PluginAlgorithm scsg_epoch_plugin(int B1, int b1, double eta);

// One full-gradient descent step; the simplest admissible plugin.
PluginAlgorithm gd_step_plugin(double eta);

// Generic framework: run the plugin until the first-order condition holds,
// then invoke the escaping routine; stop when it fails to decrease f by
// more than f_thres.
Trace framework_run(const FiniteSumProblem& p, const PluginAlgorithm& plugin,
                    const OptimizerConfig& cfg, const Rng& rng,
                    std::optional<Vector> x0 = std::nullopt);

// Sampled first-order check: |S| = ceil(2 l^2 (1 + log(1/delta)) / eps^2)
// draws with replacement, capped at n (cap means the exact full-gradient
// check). True certifies ||grad f(x)|| <= eps with probability >= 1-delta.
bool first_order_check_sampled(const FiniteSumProblem& p, const Vector& x,
                               double eps, double delta, Substream& rng);

// Size of the sample the check would use, before capping at n.
std::int64_t first_order_sample_size(double l, double eps, double delta);

// GD / SGD / PGD / CNC-GD / CNC-SGD baselines sharing the Trace schema.
Trace baseline_run(const MethodSpec& method, const FiniteSumProblem& p,
                   const OptimizerConfig& cfg, const Rng& rng,
                   const RunHooks& hooks = {},
                   std::optional<Vector> x0 = std::nullopt);

}  // namespace cnc
