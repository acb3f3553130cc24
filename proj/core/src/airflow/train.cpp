#include "aio/airflow/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "aio/rng.hpp"

namespace aio::airflow {

void TrainingConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  if (!(validation_split > 0.0 && validation_split < 1.0))
    throw std::invalid_argument("validation split must be in (0, 1)");
  if (batch_size < 1 || epochs < 1)
    throw std::invalid_argument("batch size and epochs must be >= 1");
  if (!use_airflow && !use_gyro && !use_accel && !use_throttle)
    throw std::invalid_argument("at least one input group must be enabled");
}

Eigen::VectorXd TrainingConfig::feature_mask() const {
  Eigen::VectorXd mask = Eigen::VectorXd::Zero(kInputDim);
  if (use_airflow) mask.segment(0, 8).setOnes();
  if (use_gyro) mask.segment(8, 3).setOnes();
  if (use_accel) mask.segment(11, 3).setOnes();
  if (use_throttle) mask.segment(14, 6).setOnes();
  return mask;
}

namespace {

Eigen::Matrix<double, kInputDim, 1> features(const sim::SensorRow& r) {
  Eigen::Matrix<double, kInputDim, 1> x;
  x.segment(0, 8) = r.whisker;
  x.segment(8, 3) = r.gyro;
  x.segment(11, 3) = r.accel;
  x.segment(14, 6) = r.throttle;
  return x;
}

double mse_of(const LstmRegressor& m, const std::vector<Window>& windows,
              const std::vector<Vec3>& targets) {
  double sum = 0.0;
  for (std::size_t i = 0; i < windows.size(); ++i)
    sum += (m.forward(windows[i]) - targets[i]).squaredNorm();
  return sum / (3.0 * static_cast<double>(windows.size()));
}

}  // namespace

WindowDataset build_windows(const sim::SensorLog& log) {
  WindowDataset out;
  const int stride = std::max(1, static_cast<int>(std::llround(log.rate_hz / kAirflowInputHz)));
  const std::size_t span = static_cast<std::size_t>(stride) * (kSeqLen - 1);
  for (std::size_t last = span; last < log.rows.size();
       last += static_cast<std::size_t>(stride)) {
    Window w;
    for (int s = 0; s < kSeqLen; ++s)
      w.row(s) = features(log.rows[last - span + s * stride]).transpose();
    const sim::SensorRow& end = log.rows[last];
    out.windows.push_back(w);
    out.targets.push_back(-end.gt_R.transpose() * end.gt_v);
  }
  return out;
}

TrainingResult lstm_train(const std::vector<sim::SensorLog>& logs,
                          const TrainingConfig& config) {
  config.validate();

  std::vector<Window> windows;
  std::vector<Vec3> targets;
  for (const auto& log : logs) {
    WindowDataset d = build_windows(log);
    windows.insert(windows.end(), d.windows.begin(), d.windows.end());
    targets.insert(targets.end(), d.targets.begin(), d.targets.end());
  }
  if (windows.empty()) throw std::invalid_argument("no training windows");

  auto rng = make_rng(config.seed, "lstm-train");
  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  const std::size_t n_val = std::max<std::size_t>(
      1, static_cast<std::size_t>(config.validation_split * windows.size()));
  const std::size_t n_train = windows.size() - n_val;
  if (n_train == 0) throw std::invalid_argument("dataset too small for the split");

  std::vector<Window> train_w(n_train), val_w(n_val);
  std::vector<Vec3> train_t(n_train), val_t(n_val);
  for (std::size_t i = 0; i < n_train; ++i) {
    train_w[i] = windows[order[i]];
    train_t[i] = targets[order[i]];
  }
  for (std::size_t i = 0; i < n_val; ++i) {
    val_w[i] = windows[order[n_train + i]];
    val_t[i] = targets[order[n_train + i]];
  }

  LstmRegressor model = make_empty_regressor();
  model.feature_mask = config.feature_mask();

  // z-normalization statistics from the training split, active features only.
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(kInputDim);
  Eigen::VectorXd sum2 = Eigen::VectorXd::Zero(kInputDim);
  for (const auto& w : train_w) {
    for (int s = 0; s < kSeqLen; ++s) {
      sum += w.row(s).transpose();
      sum2 += w.row(s).transpose().cwiseAbs2();
    }
  }
  const double count = static_cast<double>(n_train * kSeqLen);
  model.norm_mean = sum / count;
  model.norm_std = ((sum2 / count - model.norm_mean.cwiseAbs2()).cwiseMax(0.0))
                       .cwiseSqrt().cwiseMax(1e-6);
  for (int i = 0; i < kInputDim; ++i) {
    if (model.feature_mask[i] == 0.0) {
      model.norm_mean[i] = 0.0;
      model.norm_std[i] = 1.0;
    }
  }

  // Uniform init scaled by 1/sqrt(fan-in); forget-gate biases +1.
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  auto init_layer = [&](LstmLayer& l, int fan_in) {
    const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (Eigen::Index r = 0; r < l.W.rows(); ++r)
      for (Eigen::Index c = 0; c < l.W.cols(); ++c) l.W(r, c) = s * unif(rng);
    for (Eigen::Index r = 0; r < l.U.rows(); ++r)
      for (Eigen::Index c = 0; c < l.U.cols(); ++c) l.U(r, c) = s * unif(rng);
    l.b.setZero();
    l.b.segment(kHidden, kHidden).setOnes();
  };
  init_layer(model.layer1, kInputDim + kHidden);
  init_layer(model.layer2, 2 * kHidden);
  const double hs = 1.0 / std::sqrt(static_cast<double>(kHidden));
  for (Eigen::Index r = 0; r < kOutputDim; ++r)
    for (Eigen::Index c = 0; c < kHidden; ++c) model.head_W(r, c) = hs * unif(rng);
  model.head_b.setZero();

  TrainingResult result;
  Eigen::VectorXd theta = model.params_flat();
  Eigen::VectorXd m_adam = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd v_adam = Eigen::VectorXd::Zero(theta.size());
  long step = 0;

  LstmRegressor checkpoint = model;
  std::vector<std::size_t> idx(n_train);
  std::iota(idx.begin(), idx.end(), 0);

  for (int epoch = 0; epoch < config.epochs && !result.diverged; ++epoch) {
    std::shuffle(idx.begin(), idx.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t at = 0; at < n_train; at += config.batch_size) {
      const std::size_t bs = std::min<std::size_t>(config.batch_size, n_train - at);
      std::vector<Window> bw(bs);
      std::vector<Vec3> bt(bs);
      for (std::size_t i = 0; i < bs; ++i) {
        bw[i] = train_w[idx[at + i]];
        bt[i] = train_t[idx[at + i]];
      }
      Eigen::VectorXd grad;
      const double loss = loss_and_gradient(model, bw, bt, grad);
      if (!std::isfinite(loss)) {
        result.diverged = true;
        model = checkpoint;
        break;
      }
      epoch_loss += loss;
      grad /= static_cast<double>(bs);
      ++step;
      m_adam = config.adam_beta1 * m_adam + (1.0 - config.adam_beta1) * grad;
      v_adam = config.adam_beta2 * v_adam +
               (1.0 - config.adam_beta2) * grad.cwiseAbs2();
      const double bc1 = 1.0 - std::pow(config.adam_beta1, step);
      const double bc2 = 1.0 - std::pow(config.adam_beta2, step);
      theta -= (config.learning_rate / bc1) *
               (m_adam.array() /
                ((v_adam.array() / bc2).sqrt() + config.adam_eps)).matrix();
      model.set_params_flat(theta);
    }
    if (result.diverged) break;
    checkpoint = model;
    result.train_mse.push_back(2.0 * epoch_loss / (3.0 * static_cast<double>(n_train)));
    result.val_mse.push_back(mse_of(model, val_w, val_t));
  }

  // Fixed measurement covariance from validation residuals.
  Mat3 cov = Mat3::Zero();
  for (std::size_t i = 0; i < n_val; ++i) {
    const Vec3 r = model.forward(val_w[i]) - val_t[i];
    cov += r * r.transpose();
  }
  model.sigma_lstm = cov / static_cast<double>(n_val) + 1e-6 * Mat3::Identity();

  result.model = model;
  return result;
}

}  // namespace aio::airflow
