#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <variant>

#include <json.hpp>

#include "cnc/optim.hpp"
#include "cnc/problem.hpp"
#include "cnc/trace.hpp"

namespace cnc {

struct SigmoidSpec {
  int n = 40;
  int d = 4;
  double lambda = 0.5;
  std::uint64_t data_seed = 7;
};

// Controlled saddle instance. Patterns: "zero" (no gradient noise) and
// "e2split" (two components with noise +/- scale * e2).
struct SaddleSpec {
  std::vector<double> spectrum = {1.0, -1.0};
  std::string noise_pattern = "e2split";
  double noise_scale = 1.0;
};

using ProblemSpec = std::variant<SigmoidSpec, SaddleSpec>;

FiniteSumProblem build_problem(const ProblemSpec& spec);

struct RunSpec {
  ProblemSpec problem;
  MethodSpec method;
  OptimizerConfig config;
  std::uint64_t seed = 0;
  int probe_lambda_every = 0;  // 0 = off
  IfoConvention ifo_convention = IfoConvention::paper;
  std::optional<Vector> x0;    // default: N(0, I) on the init substream
};

// Builds the problem, runs the method with optional spectral probes and
// returns the trace. Deterministic in the spec.
Trace run_experiment(const RunSpec& spec);

// CSV `epoch,f,grad_norm,ifo,perturbed,lambda_min,tau` plus a JSON summary
// sidecar at <path>.summary.json. Byte-stable for identical traces.
void write_trace(const Trace& trace, const std::filesystem::path& csv_path);

// First epoch whose objective drops below plateau - 0.01 * |plateau| after
// a plateau (gradient norm <= eps for >= 3 consecutive epochs).
std::optional<int> detect_escape_epoch(const Trace& trace, double eps);

// Runs [seed_begin, seed_end] and writes trace_seed<k>.csv files plus an
// aggregate with escape-epoch order statistics.
nlohmann::json sweep(const RunSpec& base, std::uint64_t seed_begin,
                     std::uint64_t seed_end,
                     const std::filesystem::path& out_dir);

int cli_main(int argc, char** argv);

}  // namespace cnc
