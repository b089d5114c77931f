#include <exception>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cnc/config.hpp"
#include "cnc/harness.hpp"
#include "cnc/spectral.hpp"

namespace cnc {
namespace {

struct ProblemFlags {
  std::string kind = "sigmoid";
  int data_n = 40;
  int data_d = 4;
  double lambda = 0.5;
  std::uint64_t data_seed = 7;
  std::vector<double> spectrum = {1.0, -1.0};
  std::string noise_pattern = "e2split";
  double noise_scale = 1.0;
};

void add_problem_flags(CLI::App* cmd, ProblemFlags& pf) {
  cmd->add_option("--problem", pf.kind, "Problem family: sigmoid | saddle")
      ->check(CLI::IsMember({"sigmoid", "saddle"}));
  cmd->add_option("--data-n", pf.data_n, "Sigmoid: number of samples");
  cmd->add_option("--data-d", pf.data_d, "Sigmoid: dimension");
  cmd->add_option("--lambda", pf.lambda, "Sigmoid: regularization weight");
  cmd->add_option("--data-seed", pf.data_seed, "Sigmoid: dataset seed");
  cmd->add_option("--spectrum", pf.spectrum,
                  "Saddle: Hessian eigenvalues (repeat or comma-separate)")
      ->delimiter(',');
  cmd->add_option("--noise-pattern", pf.noise_pattern,
                  "Saddle: zero | e2split");
  cmd->add_option("--noise-scale", pf.noise_scale, "Saddle: noise magnitude");
}

ProblemSpec to_problem_spec(const ProblemFlags& pf) {
  if (pf.kind == "sigmoid")
    return SigmoidSpec{pf.data_n, pf.data_d, pf.lambda, pf.data_seed};
  return SaddleSpec{pf.spectrum, pf.noise_pattern, pf.noise_scale};
}

struct ConfigFlags {
  std::string config_file;
  std::vector<std::string> overrides;  // key=value
};

void add_config_flags(CLI::App* cmd, ConfigFlags& cf) {
  cmd->add_option("--config", cf.config_file, "Flat key = value config file");
  cmd->add_option("--set", cf.overrides,
                  "Override a config key, e.g. --set eps=1e-4");
}

OptimizerConfig resolve_config(const ConfigFlags& cf) {
  OptimizerConfig cfg;
  if (!cf.config_file.empty()) cfg = load_config_file(cf.config_file);
  for (const std::string& kv : cf.overrides) {
    auto pos = kv.find('=');
    if (pos == std::string::npos)
      throw std::runtime_error("--set expects key=value, got '" + kv + "'");
    std::string key = kv.substr(0, pos);
    std::string value = kv.substr(pos + 1);
    auto strip = [](std::string& s) {
      s.erase(0, s.find_first_not_of(" \t"));
      auto end = s.find_last_not_of(" \t");
      s.erase(end == std::string::npos ? 0 : end + 1);
    };
    strip(key);
    strip(value);
    apply_config_line(cfg, key, value);
  }
  return cfg;
}

Vector load_vector(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open iterate file " + path);
  std::vector<double> vals;
  std::string token;
  while (std::getline(in, token)) {
    std::istringstream line(token);
    std::string cell;
    while (std::getline(line, cell, ',')) {
      if (cell.find_first_not_of(" \t\r") == std::string::npos) continue;
      vals.push_back(std::stod(cell));
    }
  }
  if (vals.empty()) throw std::runtime_error("iterate file " + path + " is empty");
  return Eigen::Map<Vector>(vals.data(), static_cast<int>(vals.size()));
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Finite-sum optimization benchmark runner"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Write a two-Gaussian dataset CSV");
  int gen_n = 40, gen_d = 4;
  std::uint64_t gen_seed = 7;
  std::string gen_out;
  gen->add_option("--n", gen_n, "Number of samples (even)")->required();
  gen->add_option("--d", gen_d, "Dimension")->required();
  gen->add_option("--seed", gen_seed, "Dataset seed");
  gen->add_option("--out", gen_out, "Output CSV path")->required();

  // shared run/sweep state
  ProblemFlags run_pf, sweep_pf, cert_pf;
  ConfigFlags run_cf, sweep_cf, val_cf;

  // run
  auto* run = app.add_subcommand("run", "Run one method and write its trace");
  std::string run_method = "cnc-scsg", run_ifo = "paper", run_out;
  std::uint64_t run_seed = 0;
  int run_epochs = -1, run_probe = 0;
  add_problem_flags(run, run_pf);
  add_config_flags(run, run_cf);
  run->add_option("--method", run_method,
                  "gd | sgd | pgd | cnc-gd | cnc-sgd | scsg | cnc-scsg");
  run->add_option("--seed", run_seed, "Run seed");
  run->add_option("--epochs", run_epochs, "Epoch budget override");
  run->add_option("--probe-every", run_probe,
                  "Probe lambda_min every k epochs (0 = off)");
  run->add_option("--ifo-convention", run_ifo, "paper | strict")
      ->check(CLI::IsMember({"paper", "strict"}));
  run->add_option("--out", run_out, "Trace CSV path")->required();

  // sweep
  auto* swp = app.add_subcommand("sweep", "Run a seed range and aggregate");
  std::string swp_method = "cnc-scsg", swp_ifo = "paper", swp_range = "0..49";
  std::string swp_out_dir;
  int swp_epochs = -1, swp_probe = 0;
  add_problem_flags(swp, sweep_pf);
  add_config_flags(swp, sweep_cf);
  swp->add_option("--method", swp_method,
                  "gd | sgd | pgd | cnc-gd | cnc-sgd | scsg | cnc-scsg");
  swp->add_option("--seeds", swp_range, "Seed range, e.g. 0..49");
  swp->add_option("--epochs", swp_epochs, "Epoch budget override");
  swp->add_option("--probe-every", swp_probe,
                  "Probe lambda_min every k epochs (0 = off)");
  swp->add_option("--ifo-convention", swp_ifo, "paper | strict")
      ->check(CLI::IsMember({"paper", "strict"}));
  swp->add_option("--out-dir", swp_out_dir, "Output directory")->required();

  // validate-config
  auto* val = app.add_subcommand("validate-config",
                                 "Check a config against the constraint system");
  ProblemConstants val_consts;
  add_config_flags(val, val_cf);
  val->add_option("--L", val_consts.L, "Gradient Lipschitz constant");
  val->add_option("--rho", val_consts.rho, "Hessian Lipschitz constant");
  val->add_option("--l", val_consts.l, "Component gradient norm bound");
  val->add_option("--tau", val_consts.tau, "Negative-curvature second moment");
  val->add_option("--f-gap", val_consts.f_star_gap, "f(x0) - f* upper bound");

  // certify
  auto* cert = app.add_subcommand(
      "certify", "Probe the minimum Hessian eigenvalue at a stored iterate");
  std::string cert_x;
  double cert_tol = 1e-6;
  int cert_iters = 0;
  std::uint64_t cert_seed = 0;
  add_problem_flags(cert, cert_pf);
  cert->add_option("--x", cert_x, "Iterate file (one coordinate per line)")
      ->required();
  cert->add_option("--tol", cert_tol, "Eigenvalue residual tolerance");
  cert->add_option("--max-iter", cert_iters,
                   "Power-iteration budget (0 = dimension-based default)");
  cert->add_option("--seed", cert_seed, "Probe seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) {
      Dataset data = generate_dataset(gen_n, gen_d, gen_seed);
      std::ofstream out(gen_out, std::ios::binary);
      if (!out) throw std::runtime_error("cannot open " + gen_out);
      data.write_csv(out);
      std::cout << "wrote " << data.n << " x " << data.d << " dataset to "
                << gen_out << "\n";
      return 0;
    }

    if (run->parsed()) {
      RunSpec spec;
      spec.problem = to_problem_spec(run_pf);
      spec.method.kind = parse_method(run_method);
      spec.config = resolve_config(run_cf);
      if (run_epochs >= 0) spec.config.max_epochs = run_epochs;
      spec.seed = run_seed;
      spec.probe_lambda_every = run_probe;
      spec.ifo_convention =
          run_ifo == "strict" ? IfoConvention::strict : IfoConvention::paper;
      Trace trace = run_experiment(spec);
      write_trace(trace, run_out);
      std::cout << method_name(spec.method.kind) << ": " << trace.total_epochs
                << " epochs, " << trace.total_ifo << " ifo, final |grad| = "
                << trace.final_grad_norm << ", reason = " << trace.reason
                << "\n";
      return 0;
    }

    if (swp->parsed()) {
      auto sep = swp_range.find("..");
      if (sep == std::string::npos)
        throw std::runtime_error("--seeds expects a..b, got '" + swp_range + "'");
      std::uint64_t lo = std::stoull(swp_range.substr(0, sep));
      std::uint64_t hi = std::stoull(swp_range.substr(sep + 2));
      RunSpec base;
      base.problem = to_problem_spec(sweep_pf);
      base.method.kind = parse_method(swp_method);
      base.config = resolve_config(sweep_cf);
      if (swp_epochs >= 0) base.config.max_epochs = swp_epochs;
      base.probe_lambda_every = swp_probe;
      base.ifo_convention =
          swp_ifo == "strict" ? IfoConvention::strict : IfoConvention::paper;
      nlohmann::json agg = sweep(base, lo, hi, swp_out_dir);
      std::cout << agg.dump(2) << "\n";
      return 0;
    }

    if (val->parsed()) {
      OptimizerConfig cfg = resolve_config(val_cf);
      std::vector<Violation> violations = validate_config(cfg, val_consts);
      if (violations.empty()) {
        std::cout << "config valid\n";
        return 0;
      }
      for (const Violation& v : violations)
        std::cout << v.row << ": " << v.message << "\n";
      return 1;
    }

    if (cert->parsed()) {
      FiniteSumProblem problem = build_problem(to_problem_spec(cert_pf));
      Vector x = load_vector(cert_x);
      int iters = cert_iters > 0 ? cert_iters
                                 : default_lambda_min_iters(problem.d());
      Substream stream = Rng(cert_seed).stream("spectral");
      SpectralReport report =
          lambda_min_probe(problem, x, cert_tol, iters, stream);
      std::cout << report.to_json().dump(2) << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace cnc
