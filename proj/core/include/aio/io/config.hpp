// JSON configuration for the pipeline: dataset specs, training, map fitting,
// filter and experiment settings, all hanging off a single root seed.
#pragma once

#include <string>
#include <vector>

#include "aio/airflow/train.hpp"
#include "aio/ekf/runner.hpp"
#include "aio/eval/experiment.hpp"
#include "aio/sim/sensors.hpp"
#include "aio/sim/trajectory.hpp"
#include "aio/windmap/wind_map.hpp"

namespace aio::io {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DatasetSpec {
  std::string name;
  sim::TrajectorySpec trajectory;
  sim::WindFieldSpec wind;
  double failure_time_s = -1.0;  // < 0 means odometry never fails
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  sim::SensorNoiseSpec noise;
  sim::WhiskerParams whisker;
  sim::ThrottleModel throttle;
  std::vector<DatasetSpec> datasets;

  std::vector<std::string> training_datasets;
  std::string mapping_dataset;
  std::string eval_dataset;

  airflow::TrainingConfig training;

  windmap::KernelParams kernel;
  int inducing_points = 20;
  windmap::GpFitConfig gp;
  bool map_exact = false;
  double wind_burn_in_s = 10.0;      // estimate-wind warm-up
  double wind_sample_hz = 1.0;

  double wind_rw_density = 0.3;      // sqrt(Sigma_w) in no-map dead reckoning
  double map_wind_rw_density = 1.0;  // sqrt(Sigma_w) while estimating the map
  int odom_every = 10;
  bool use_odom_v = true;
  bool use_odom_att = true;

  eval::ExperimentSpec experiment;
  std::vector<ekf::FilterMode> eval_modes;
  ekf::FilterMode run_mode = ekf::FilterMode::AioNoMap;

  const DatasetSpec& dataset(const std::string& name) const;
  /// Filter config consistent with the configured sensor noise.
  ekf::FilterConfig make_filter_config(ekf::FilterMode mode) const;
};

PipelineConfig parse_pipeline_config(const std::string& json_text);
PipelineConfig load_pipeline_config(const std::string& path);
std::string pipeline_config_to_json(const PipelineConfig& cfg);

ekf::FilterMode mode_from_string(const std::string& s);

}  // namespace aio::io
