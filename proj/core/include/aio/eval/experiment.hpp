// Failure-injection experiment protocol: repeated runs with a failure time
// sampled uniformly in a window, each mode replayed on the identical log,
// metrics over the post-failure horizon, quartile aggregation.
#pragma once

#include <functional>
#include <map>
#include <string>

#include "aio/ekf/runner.hpp"
#include "aio/eval/metrics.hpp"

namespace aio::eval {

struct ExperimentSpec {
  int repetitions = 10;
  double failure_start_s = 20.0;
  double failure_window_s = 2.0;
  double horizon_s = 30.0;  // metrics run from the failure to this time
  std::uint64_t seed = 0;

  void validate(double log_duration_s) const;
};

struct ExperimentArtifacts {
  // Produces the log for one repetition (odometry available throughout).
  std::function<sim::SensorLog(int rep)> make_log;
  std::vector<ekf::FilterMode> modes;
  ekf::FilterConfig base_config;  // mode is overridden per replay
  const airflow::LstmRegressor* model = nullptr;
  const windmap::WindMap* map = nullptr;
};

struct RunRecord {
  int rep = 0;
  std::string mode;
  double failure_t = 0.0;
  bool ok = false;
  std::string error;
  Metrics metrics;
};

struct MetricSummary {
  double median = 0.0, q1 = 0.0, q3 = 0.0, min = 0.0, max = 0.0;
  int count = 0;
};

struct ExperimentResult {
  std::vector<RunRecord> records;
  // aggregates[mode][metric] with metric in {rmse, rmse_yaw, dr, rte_2s}
  std::map<std::string, std::map<std::string, MetricSummary>> aggregates;
};

std::string mode_name(ekf::FilterMode mode);

ExperimentResult run_experiment(const ExperimentSpec& spec,
                                const ExperimentArtifacts& artifacts);

/// Long-format CSV: run, mode, failure_t, rmse, rmse_yaw, dr, rte_2s.
void write_results_csv(const ExperimentResult& r, const std::string& path);

/// Aggregate JSON: per mode x metric {median, q1, q3, min, max, count}, plus
/// the grouped per-run values for external box-plot rendering.
void write_aggregate_json(const ExperimentResult& r, const std::string& path);

}  // namespace aio::eval
