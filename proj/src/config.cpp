#include "cnc/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cnc {

namespace {

// Loose-side slack so derived configs sitting exactly on a bound pass.
bool leq(double value, double bound) {
  return value <= bound + 1e-9 * std::abs(bound) + 1e-15;
}

std::string trim(const std::string& s) {
  auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

double scsg_capital_c(double eta, double L, int n, int b) {
  double bb = static_cast<double>(b);
  double nn = static_cast<double>(n);
  double denom =
      (bb - eta * eta * L * L * nn / bb - eta * nn) * (1.0 - eta * L) /
          (1.0 + 2.0 * eta) -
      L * L * L * eta * eta * nn / (2.0 * bb);
  if (!(denom > 0.0)) {
    throw std::domain_error(
        "scsg_capital_c: eta too large for C > 0 (denominator " +
        std::to_string(denom) + ")");
  }
  return bb / denom;
}

std::vector<Violation> validate_config(const OptimizerConfig& cfg,
                                       const ProblemConstants& consts) {
  std::vector<Violation> v;
  auto fail = [&v](std::string row, std::string msg) {
    v.push_back({std::move(row), std::move(msg)});
  };

  if (!(cfg.eps > 0.0)) fail("positivity", "eps must be > 0");
  if (!(cfg.eta > 0.0)) fail("positivity", "eta must be > 0");
  if (!(cfg.r > 0.0)) fail("positivity", "r must be > 0");
  if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) fail("positivity", "delta must be in (0,1)");
  if (cfg.b < 1 || (cfg.n > 0 && cfg.b > cfg.n)) fail("positivity", "need 1 <= b <= n");
  if (cfg.k_thres < 0) fail("positivity", "k_thres must be >= 0");
  if (cfg.max_epochs < 0) fail("positivity", "max_epochs must be >= 0");
  if (cfg.mode == Mode::practical) {
    if (!(cfg.stall_tol > 0.0)) fail("positivity", "stall_tol must be > 0");
    if (cfg.stall_epochs < 1) fail("positivity", "stall_epochs must be >= 1");
    return v;
  }

  // Theory mode: the full constraint system.
  if (!(consts.tau <= consts.l * consts.l + 1e-12)) {
    fail("tau <= l^2", "CNC constant exceeds squared gradient bound");
  }
  if (std::abs(cfg.eps_g - cfg.eps) > 1e-12 * (1.0 + cfg.eps)) {
    fail("eps_g = eps", "eps_g must equal eps");
  }
  double eps_h_target = std::pow(consts.rho * cfg.eps, 0.4);
  if (std::abs(cfg.eps_h - eps_h_target) > 1e-9 * (1.0 + eps_h_target)) {
    fail("eps_h = (rho eps)^{2/5}", "eps_h inconsistent with rho and eps");
  }
  if (8 * cfg.b > cfg.n) {
    fail("b <= n/8", "minibatch too large: b=" + std::to_string(cfg.b) +
                         " > n/8 with n=" + std::to_string(cfg.n));
  }
  if (!(cfg.gamma > 0.0) || cfg.gamma > 1.0 / 3.0 + 1e-12) {
    fail("gamma <= 1/3", "gamma must be in (0, 1/3]");
  }
  if (cfg.eta0) {
    double cap = *cfg.eta0 * consts.L *
                 std::pow(static_cast<double>(cfg.n) / cfg.b, 2.0 / 3.0);
    if (!leq(cfg.gamma, cap)) {
      fail("gamma <= eta0 L (n/b)^{2/3}", "gamma above the eta0 cap");
    }
  }
  double ratio = static_cast<double>(cfg.b) / cfg.n;
  double eta_target = cfg.gamma / consts.L * std::pow(ratio, 2.0 / 3.0);
  if (std::abs(cfg.eta - eta_target) > 1e-12 * (1.0 + eta_target)) {
    fail("eta L = gamma (b/n)^{2/3}", "eta inconsistent with gamma, b, n");
  }

  double C;
  try {
    C = scsg_capital_c(cfg.eta, consts.L, cfg.n, cfg.b);
  } catch (const std::domain_error& e) {
    fail("C > 0", e.what());
    return v;
  }
  double c2 = std::min(0.5, cfg.eta / (C * consts.L));
  double eh2 = cfg.eps_h * cfg.eps_h;
  double r_cap = c2 * consts.tau / (12.0 * consts.rho * std::pow(consts.l, 3)) * eh2;
  if (!leq(cfg.r, r_cap)) {
    fail("r <= min(1/2, eta/(CL)) tau/(12 rho l^3) eps_h^2",
         "perturbation step too large");
  }
  double f_cap = cfg.eta * consts.tau * cfg.r * eh2 / (12.0 * consts.l * consts.rho * C);
  if (!leq(cfg.f_thres, f_cap)) {
    fail("f_thres <= eta tau r eps_h^2 / (12 l rho C)", "f_thres too large");
  }
  double log_eh = std::log(1.0 / cfg.eps_h);
  double k_floor = cfg.c1 / (cfg.eta * cfg.eps_h) *
                   (static_cast<double>(cfg.n) / cfg.b) * log_eh;
  if (!leq(k_floor, static_cast<double>(cfg.k_thres))) {
    fail("K_thres >= (C1/(eta eps_h)) (n/b) log(1/eps_h)", "k_thres too small");
  }
  double g_upper1 = cfg.gamma / (5.0 * consts.L) * std::pow(1.0 / ratio, 1.0 / 3.0) *
                    cfg.eps_g * cfg.eps_g;
  if (!leq(cfg.g_thres, g_upper1)) {
    fail("g_thres <= (gamma/(5L)) (n/b)^{1/3} eps_g^2", "g_thres too large");
  }
  double g_lower = 10.0 * consts.l * consts.l * cfg.gamma * cfg.gamma /
                   (consts.L * cfg.delta) * std::pow(ratio, 1.0 / 3.0);
  if (!leq(g_lower, cfg.g_thres)) {
    fail("g_thres >= (10 l^2 gamma^2 / (L delta)) (b/n)^{1/3}",
         "g_thres too small");
  }
  double g_upper2 = (1.0 / ratio) * cfg.eta * cfg.eta * eh2 * cfg.eps_h *
                    consts.tau * cfg.r /
                    (cfg.c1 * 12.0 * consts.l * consts.rho * C) / log_eh;
  if (!leq(cfg.g_thres, g_upper2)) {
    fail("g_thres <= (n/b) eta^2 eps_h^3 tau r / (12 C1 l rho C) log^{-1}(1/eps_h)",
         "g_thres too large");
  }
  return v;
}

OptimizerConfig derive_theory_params(double eps, const ProblemConstants& consts,
                                     int n, int b, double gamma, double delta,
                                     double c1) {
  if (!(eps > 0.0)) throw std::invalid_argument("derive_theory_params: eps must be > 0");
  if (b < 1 || n < b) throw std::invalid_argument("derive_theory_params: need 1 <= b <= n");
  if (!(gamma > 0.0)) throw std::invalid_argument("derive_theory_params: gamma must be > 0");
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("derive_theory_params: delta must be in (0,1)");
  }

  OptimizerConfig cfg;
  cfg.mode = Mode::theory;
  cfg.eps = eps;
  cfg.eps_g = eps;
  cfg.eps_h = std::pow(consts.rho * eps, 0.4);
  cfg.gamma = gamma;
  cfg.n = n;
  cfg.b = b;
  cfg.delta = delta;
  cfg.c1 = c1;
  double ratio = static_cast<double>(b) / n;
  cfg.eta = gamma / consts.L * std::pow(ratio, 2.0 / 3.0);

  double C = scsg_capital_c(cfg.eta, consts.L, n, b);  // throws if eta too large
  double c2 = std::min(0.5, cfg.eta / (C * consts.L));
  double eh2 = cfg.eps_h * cfg.eps_h;
  cfg.r = c2 * consts.tau / (12.0 * consts.rho * std::pow(consts.l, 3)) * eh2;
  cfg.f_thres =
      cfg.eta * consts.tau * cfg.r * eh2 / (12.0 * consts.l * consts.rho * C);
  double log_eh = std::log(1.0 / cfg.eps_h);
  cfg.k_thres = static_cast<int>(
      std::ceil(c1 / (cfg.eta * cfg.eps_h) * (1.0 / ratio) * log_eh));
  cfg.g_thres = (1.0 / ratio) * cfg.eta * cfg.eta * eh2 * cfg.eps_h *
                consts.tau * cfg.r /
                (c1 * 12.0 * consts.l * consts.rho * C) / log_eh;

  double t_epochs = ratio * 288.0 * C * c1 * std::pow(consts.l, 4) *
                    consts.f_star_gap /
                    (c2 * delta * cfg.eta * cfg.eta * consts.tau * consts.tau *
                     eps * eps) *
                    std::log(1.0 / (std::sqrt(consts.rho) * std::pow(eps, 0.4)));
  cfg.max_epochs = static_cast<int>(
      std::ceil(std::clamp(t_epochs, 1.0, 1e9)));
  return cfg;
}

void apply_config_line(OptimizerConfig& cfg, const std::string& key,
                       const std::string& value) {
  auto as_double = [&value, &key]() {
    try {
      return std::stod(value);
    } catch (const std::exception&) {
      throw std::runtime_error("config: bad number for key '" + key + "': " + value);
    }
  };
  auto as_int = [&value, &key]() {
    try {
      return std::stoi(value);
    } catch (const std::exception&) {
      throw std::runtime_error("config: bad integer for key '" + key + "': " + value);
    }
  };
  auto as_bool = [&value, &key]() {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw std::runtime_error("config: bad boolean for key '" + key + "': " + value);
  };

  if (key == "eps") cfg.eps = as_double();
  else if (key == "eps_g") cfg.eps_g = as_double();
  else if (key == "eps_h") cfg.eps_h = as_double();
  else if (key == "eta") cfg.eta = as_double();
  else if (key == "r") cfg.r = as_double();
  else if (key == "gamma") cfg.gamma = as_double();
  else if (key == "b") cfg.b = as_int();
  else if (key == "n") cfg.n = as_int();
  else if (key == "k_thres") cfg.k_thres = as_int();
  else if (key == "f_thres") cfg.f_thres = as_double();
  else if (key == "g_thres") cfg.g_thres = as_double();
  else if (key == "max_epochs") cfg.max_epochs = as_int();
  else if (key == "delta") cfg.delta = as_double();
  else if (key == "stall_tol") cfg.stall_tol = as_double();
  else if (key == "stall_epochs") cfg.stall_epochs = as_int();
  else if (key == "c1") cfg.c1 = as_double();
  else if (key == "eta0") cfg.eta0 = as_double();
  else if (key == "perturbation_enabled") cfg.perturbation_enabled = as_bool();
  else if (key == "mode") {
    if (value == "practical") cfg.mode = Mode::practical;
    else if (value == "theory") cfg.mode = Mode::theory;
    else throw std::runtime_error("config: mode must be practical or theory");
  } else {
    throw std::runtime_error("config: unknown key '" + key + "'");
  }
}

OptimizerConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path.string());
  OptimizerConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config: line " + std::to_string(lineno) +
                               " is not 'key = value'");
    }
    apply_config_line(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

}  // namespace cnc
