// Relative airflow regressor: a 2-layer LSTM (16 units per layer, sequence
// length 5) with a linear head, mapping windows of whisker deflections, gyro,
// accel and throttle to the body-frame relative airflow.
#pragma once

#include <string>
#include <vector>

#include "aio/so3.hpp"

namespace aio::airflow {

inline constexpr int kInputDim = 20;  // whisker 8, gyro 3, accel 3, throttle 6
inline constexpr int kHidden = 16;
inline constexpr int kSeqLen = 5;
inline constexpr int kOutputDim = 3;

// Gate rows are packed [input; forget; candidate; output], each kHidden wide.
struct LstmLayer {
  Eigen::MatrixXd W;  // 4H x input
  Eigen::MatrixXd U;  // 4H x H
  Eigen::VectorXd b;  // 4H
};

using Window = Eigen::Matrix<double, kSeqLen, kInputDim>;

struct LstmRegressor {
  LstmLayer layer1;   // kInputDim -> kHidden
  LstmLayer layer2;   // kHidden -> kHidden
  Eigen::MatrixXd head_W;  // 3 x kHidden
  Eigen::VectorXd head_b;  // 3
  Eigen::VectorXd norm_mean;  // kInputDim
  Eigen::VectorXd norm_std;   // kInputDim, > 0
  Eigen::VectorXd feature_mask;  // kInputDim, 1 active / 0 masked
  Mat3 sigma_lstm = 0.01 * Mat3::Identity();  // fixed measurement covariance

  /// Hidden state starts at zero for every window; gates use sigmoid, cell
  /// and output use tanh; the head reads the final layer-2 hidden state.
  Vec3 forward(const Window& window) const;

  // Flat parameter access (layer1 W,U,b, layer2 W,U,b, head W,b) used by
  // the optimizer and the finite-difference gradient check.
  Eigen::Index num_params() const;
  Eigen::VectorXd params_flat() const;
  void set_params_flat(const Eigen::VectorXd& theta);

  std::string to_json() const;
  static LstmRegressor from_json(const std::string& text);
  void save(const std::string& path) const;
  static LstmRegressor load(const std::string& path);
};

/// Zero-initialized (weights and stats) regressor with the right shapes.
LstmRegressor make_empty_regressor();

/// Squared-error loss 0.5*|y - target|^2 summed over windows, with the full
/// BPTT gradient in the flat parameter layout. Normalization stats and the
/// feature mask are treated as constants.
double loss_and_gradient(const LstmRegressor& model,
                         const std::vector<Window>& windows,
                         const std::vector<Vec3>& targets,
                         Eigen::VectorXd& grad);

}  // namespace aio::airflow
