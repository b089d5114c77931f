#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace cnc {

enum class Mode { practical, theory };

struct OptimizerConfig {
  double eps = 1e-3;    // first-order accuracy target
  double eps_g = 1e-3;
  double eps_h = 0.1;
  double eta = 0.5;     // SCSG step size
  double r = 2.0;       // SGD perturbation step size
  double gamma = 0.0;   // SCSG geometric parameter (theory mode)
  int b = 1;            // inner minibatch size
  int n = 0;            // component count the config was built for
  int k_thres = 50;     // minimum epochs between perturbations
  double f_thres = 0.0;
  double g_thres = 0.0;
  int max_epochs = 500;
  double delta = 0.1;   // failure probability
  Mode mode = Mode::practical;
  double stall_tol = 1e-8;
  int stall_epochs = 5;
  double c1 = 1.0;
  std::optional<double> eta0;  // optional gamma-constraint constant
  bool perturbation_enabled = true;
};

struct ProblemConstants {
  double L = 1.0;          // gradient Lipschitz constant
  double rho = 1.0;        // Hessian Lipschitz constant
  double l = 1.0;          // gradient norm bound
  double tau = 1.0;        // CNC constant, tau <= l^2
  double f_star_gap = 1.0; // f(x0) - f*, or an upper bound
};

struct Violation {
  std::string row;      // which constraint row was broken
  std::string message;
};

// Theory mode checks the full constraint system; practical mode checks only
// positivity and range invariants. Never clamps.
std::vector<Violation> validate_config(const OptimizerConfig& cfg,
                                       const ProblemConstants& consts);

// C = b * [ ((b - eta^2 L^2 n / b - eta n)(1 - eta L)) / (1 + 2 eta)
//           - L^3 eta^2 n / (2b) ]^-1.
// Throws when the bracketed denominator is not positive (eta too large).
double scsg_capital_c(double eta, double L, int n, int b);

// Builds a theory-mode config from the constraint system:
// eta = (gamma / L)(b/n)^{2/3}, eps_h = (rho eps)^{2/5}, maximal r and
// f_thres, minimal k_thres, and the epoch budget.
OptimizerConfig derive_theory_params(double eps, const ProblemConstants& consts,
                                     int n, int b, double gamma, double delta,
                                     double c1 = 1.0);

// Flat `key = value` config file. Unknown keys are errors.
OptimizerConfig load_config_file(const std::filesystem::path& path);
void apply_config_line(OptimizerConfig& cfg, const std::string& key,
                       const std::string& value);

}  // namespace cnc
