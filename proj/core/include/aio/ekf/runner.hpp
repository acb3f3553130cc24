// Log replay: prediction at the IMU rate, airflow updates at 25 Hz, odometry
// updates while available, dead reckoning in the configured mode afterwards.
#pragma once

#include <optional>
#include <string>

#include "aio/airflow/estimator.hpp"
#include "aio/ekf/filter.hpp"

namespace aio::ekf {

enum class FilterMode { ImuOnly, AioNoMap, AioWithMap };

struct InitSpec {
  double pos_var = 1e-4;
  double vel_var = 1e-2;
  double att_var = 1e-4;
  double ba_var = 0.05 * 0.05;
  double bg_var = 0.005 * 0.005;
  double ew_var = 1.0;
};

struct FilterConfig {
  FilterMode mode = FilterMode::ImuOnly;
  ProcessNoiseSpec noise;
  Mat3 odom_cov_p = 1e-4 * Mat3::Identity();
  Mat3 odom_cov_v = 4e-4 * Mat3::Identity();
  Mat3 odom_cov_att = 4e-6 * Mat3::Identity();
  bool use_odom_v = true;
  bool use_odom_att = true;
  int odom_every = 10;   // decimation of odometry rows (200 Hz -> 20 Hz)
  InitSpec init;
};

struct EstimateRow {
  double t = 0.0;
  Vec3 p, v;
  Vec3 ypr;  // ZYX yaw/pitch/roll
  Mat3 R;
  Vec3 ba, bg, ew;
  Vec18 cov_diag;
};

struct FilterRun {
  std::vector<EstimateRow> rows;  // one per log row
  long predict_rejections = 0;
  long airflow_updates = 0;
  long airflow_skipped = 0;
  long odom_updates = 0;
};

struct FilterInputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Replays the log. The AIO modes require a trained model; AioWithMap also a
/// map (rejected up front otherwise). odom_cutoff_s, when set, overrides the
/// log's own availability flags with an earlier failure.
FilterRun run_filter(const sim::SensorLog& log, const FilterConfig& config,
                     const airflow::LstmRegressor* model,
                     const windmap::WindMap* map,
                     std::optional<double> odom_cutoff_s = std::nullopt);

void write_estimate_csv(const FilterRun& run, const std::string& path);

}  // namespace aio::ekf
