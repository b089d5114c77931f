#include "cnc/harness.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "cnc/spectral.hpp"

namespace cnc {

FiniteSumProblem build_problem(const ProblemSpec& spec) {
  if (const auto* sig = std::get_if<SigmoidSpec>(&spec)) {
    Dataset data = generate_dataset(sig->n, sig->d, sig->data_seed);
    return make_sigmoid_problem(data, sig->lambda);
  }
  const auto& sad = std::get<SaddleSpec>(spec);
  const int d = static_cast<int>(sad.spectrum.size());
  Vector a = Eigen::Map<const Vector>(sad.spectrum.data(), d);
  std::vector<Vector> noise;
  if (sad.noise_pattern == "zero") {
    noise.assign(2, Vector::Zero(d));
  } else if (sad.noise_pattern == "e2split") {
    if (d < 2) throw std::invalid_argument("e2split pattern needs d >= 2");
    Vector c = Vector::Zero(d);
    c[1] = sad.noise_scale;
    noise = {c, -c};
  } else {
    throw std::invalid_argument("unknown saddle noise pattern '" +
                                sad.noise_pattern + "'");
  }
  return make_quadratic_saddle(QuadraticSaddleSpec::create(a, noise));
}

Trace run_experiment(const RunSpec& spec) {
  FiniteSumProblem problem = build_problem(spec.problem);
  Rng rng(spec.seed);

  RunHooks hooks;
  Substream spectral = rng.stream("spectral");
  if (spec.probe_lambda_every > 0) {
    int every = spec.probe_lambda_every;
    hooks.probe = [&problem, &spectral, every](int epoch, const Vector& x)
        -> std::pair<std::optional<double>, std::optional<double>> {
      if (epoch % every != 0) return {std::nullopt, std::nullopt};
      SpectralReport report = lambda_min_probe(
          problem, x, 1e-6, default_lambda_min_iters(problem.d()), spectral);
      return {report.lambda_min, report.tau};
    };
  }

  if (spec.method.kind == MethodKind::SCSG ||
      spec.method.kind == MethodKind::CNC_SCSG) {
    OptimizerConfig cfg = spec.config;
    cfg.perturbation_enabled =
        cfg.perturbation_enabled && spec.method.kind == MethodKind::CNC_SCSG;
    return cnc_scsg_run(problem, cfg, rng, hooks, spec.ifo_convention, spec.x0);
  }
  return baseline_run(spec.method, problem, spec.config, rng, hooks, spec.x0);
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

void write_trace(const Trace& trace, const std::filesystem::path& csv_path) {
  std::ofstream csv(csv_path, std::ios::binary);
  if (!csv) throw std::runtime_error("write_trace: cannot open " + csv_path.string());
  csv << "epoch,f,grad_norm,ifo,perturbed,lambda_min,tau\n";
  for (const TraceRow& row : trace.rows) {
    csv << row.epoch << ',' << fmt(row.f) << ',' << fmt(row.grad_norm) << ','
        << row.ifo << ',' << (row.perturbed ? 1 : 0) << ',';
    if (row.lambda_min) csv << fmt(*row.lambda_min);
    csv << ',';
    if (row.tau) csv << fmt(*row.tau);
    csv << '\n';
  }
  if (!csv) throw std::runtime_error("write_trace: write failed for " + csv_path.string());

  nlohmann::json summary{{"reason", trace.reason},
                         {"total_epochs", trace.total_epochs},
                         {"total_ifo", trace.total_ifo},
                         {"final_grad_norm", trace.final_grad_norm}};
  summary["final_lambda_min"] =
      trace.final_lambda_min ? nlohmann::json(*trace.final_lambda_min)
                             : nlohmann::json(nullptr);
  std::filesystem::path side = csv_path;
  side += ".summary.json";
  std::ofstream js(side, std::ios::binary);
  if (!js) throw std::runtime_error("write_trace: cannot open " + side.string());
  js << summary.dump(2) << '\n';
}

std::optional<int> detect_escape_epoch(const Trace& trace, double eps) {
  const auto& rows = trace.rows;
  for (std::size_t i = 0; i + 2 < rows.size(); ++i) {
    if (rows[i].grad_norm <= eps && rows[i + 1].grad_norm <= eps &&
        rows[i + 2].grad_norm <= eps) {
      double plateau = rows[i].f;
      double threshold = plateau - 0.01 * std::abs(plateau);
      for (std::size_t j = i + 1; j < rows.size(); ++j) {
        if (rows[j].f < threshold) return rows[j].epoch;
      }
      return std::nullopt;
    }
  }
  return std::nullopt;
}

nlohmann::json sweep(const RunSpec& base, std::uint64_t seed_begin,
                     std::uint64_t seed_end,
                     const std::filesystem::path& out_dir) {
  if (seed_end < seed_begin) throw std::invalid_argument("sweep: empty seed range");
  std::filesystem::create_directories(out_dir);

  nlohmann::json per_seed = nlohmann::json::array();
  std::vector<double> escapes;
  int reached = 0;
  int count = 0;
  for (std::uint64_t s = seed_begin; s <= seed_end; ++s, ++count) {
    RunSpec spec = base;
    spec.seed = s;
    Trace tr = run_experiment(spec);
    write_trace(tr, out_dir / ("trace_seed" + std::to_string(s) + ".csv"));
    std::optional<int> escape = detect_escape_epoch(tr, spec.config.eps);
    if (tr.final_grad_norm <= spec.config.eps) ++reached;
    nlohmann::json entry{{"seed", s},
                         {"reason", tr.reason},
                         {"epochs", tr.total_epochs},
                         {"ifo", tr.total_ifo},
                         {"final_grad_norm", tr.final_grad_norm}};
    entry["escape_epoch"] = escape ? nlohmann::json(*escape) : nlohmann::json(nullptr);
    per_seed.push_back(entry);
    if (escape) escapes.push_back(static_cast<double>(*escape));
  }

  nlohmann::json agg{{"seeds", per_seed},
                     {"runs", count},
                     {"escapes_detected", static_cast<int>(escapes.size())},
                     {"first_order_reached", reached}};
  if (!escapes.empty()) {
    std::sort(escapes.begin(), escapes.end());
    auto quantile = [&escapes](double q) {
      double pos = q * (escapes.size() - 1);
      std::size_t lo = static_cast<std::size_t>(pos);
      std::size_t hi = std::min(lo + 1, escapes.size() - 1);
      return escapes[lo] + (pos - lo) * (escapes[hi] - escapes[lo]);
    };
    agg["escape_epoch_quantiles"] = {{"min", escapes.front()},
                                     {"q25", quantile(0.25)},
                                     {"median", quantile(0.5)},
                                     {"q75", quantile(0.75)},
                                     {"max", escapes.back()}};
  }
  std::ofstream out(out_dir / "aggregate.json", std::ios::binary);
  out << agg.dump(2) << '\n';
  return agg;
}

}  // namespace cnc
