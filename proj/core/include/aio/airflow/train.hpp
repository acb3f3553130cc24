// LSTM training: window construction from sensor logs, ADAM on the MSE loss
// with full backpropagation through time, and identification of the fixed
// measurement covariance from validation residuals.
#pragma once

#include <cstdint>

#include "aio/airflow/lstm.hpp"
#include "aio/sim/sensor_log.hpp"

namespace aio::airflow {

inline constexpr double kAirflowInputHz = 50.0;

struct TrainingConfig {
  double learning_rate = 3e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 64;
  int epochs = 40;
  double validation_split = 0.2;
  // Input-feature groups (ablation masks).
  bool use_airflow = true;
  bool use_gyro = true;
  bool use_accel = true;
  bool use_throttle = true;
  std::uint64_t seed = 0;

  void validate() const;
  Eigen::VectorXd feature_mask() const;
};

struct WindowDataset {
  std::vector<Window> windows;
  std::vector<Vec3> targets;  // -R^T v at the window's last sample
};

/// Sequence-length-5 windows at the 50 Hz airflow rate, stride one input
/// sample. Targets assume zero wind: measured airflow equals -v in body frame.
WindowDataset build_windows(const sim::SensorLog& log);

struct TrainingResult {
  LstmRegressor model;
  std::vector<double> train_mse;  // per-component MSE per epoch
  std::vector<double> val_mse;
  bool diverged = false;
};

/// Deterministic given config.seed. Aborts at the last finite checkpoint if
/// the loss diverges. Throws on an empty dataset.
TrainingResult lstm_train(const std::vector<sim::SensorLog>& logs,
                          const TrainingConfig& config);

}  // namespace aio::airflow
