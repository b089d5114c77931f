#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cnc {

struct TraceRow {
  int epoch = 0;
  double f = 0.0;
  double grad_norm = 0.0;
  std::int64_t ifo = 0;  // cumulative, in the run's counting convention
  bool perturbed = false;
  std::optional<double> lambda_min;
  std::optional<double> tau;
};

struct Trace {
  std::vector<TraceRow> rows;
  std::string reason;   // budget | stalled | f_thres | first_order | divergence
  int total_epochs = 0;
  std::int64_t total_ifo = 0;
  double final_grad_norm = 0.0;
  std::optional<double> final_lambda_min;
};

}  // namespace cnc
