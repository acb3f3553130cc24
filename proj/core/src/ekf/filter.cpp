#include "aio/ekf/filter.hpp"

#include <Eigen/Cholesky>
#include <cmath>

namespace aio::ekf {

namespace {

// Generic EKF update with Joseph-form covariance and error-state injection.
bool apply_update(FilterState& s, const Eigen::MatrixXd& H,
                  const Eigen::VectorXd& residual, const Eigen::MatrixXd& R_eff) {
  const Eigen::MatrixXd S = H * s.P * H.transpose() + R_eff;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(S);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return false;
  const Eigen::MatrixXd K = ldlt.solve(H * s.P).transpose();
  const Vec18 delta = K * residual;
  if (!delta.allFinite()) return false;

  s.p += delta.segment<3>(kP);
  s.v += delta.segment<3>(kV);
  s.R_ref = exp_so3(delta.segment<3>(kPhi)) * s.R_ref;  // inject, phi stays 0
  s.ba += delta.segment<3>(kBa);
  s.bg += delta.segment<3>(kBg);
  s.ew += delta.segment<3>(kEw);

  const Mat18 IKH = Mat18::Identity() - K * H;
  s.P = IKH * s.P * IKH.transpose() + K * R_eff * K.transpose();
  s.symmetrize();
  return true;
}

}  // namespace

ProcessNoiseSpec ProcessNoiseSpec::from_densities(const sim::SensorNoiseSpec& n,
                                                  double wind_rw_density) {
  ProcessNoiseSpec q;
  q.sigma_a = n.accel_noise_density * n.accel_noise_density * Mat3::Identity();
  q.sigma_g = n.gyro_noise_density * n.gyro_noise_density * Mat3::Identity();
  q.sigma_ba = n.accel_bias_rw_density * n.accel_bias_rw_density * Mat3::Identity();
  q.sigma_bg = n.gyro_bias_rw_density * n.gyro_bias_rw_density * Mat3::Identity();
  q.sigma_w = wind_rw_density * wind_rw_density * Mat3::Identity();
  return q;
}

Mat18 transition_jacobian(const FilterState& s, const Vec3& accel,
                          const Vec3& gyro, double dt) {
  const Mat3 R = s.attitude();
  const Vec3 omega = (gyro - s.bg) * dt;
  Mat18 F = Mat18::Identity();
  F.block<3, 3>(kP, kV) = dt * Mat3::Identity();
  F.block<3, 3>(kV, kPhi) = -hat(R * (accel - s.ba)) * dt;
  F.block<3, 3>(kV, kBa) = -R * dt;
  // exact derivative of the attitude step R exp((omega)^) w.r.t. b_g
  F.block<3, 3>(kPhi, kBg) = -(R * exp_so3(omega)) * right_jacobian_so3(omega) * dt;
  return F;
}

bool predict(FilterState& s, const Vec3& accel, const Vec3& gyro, double dt,
             const ProcessNoiseSpec& q) {
  if (!accel.allFinite() || !gyro.allFinite()) return false;
  if (!(dt > 0.0 && dt <= 0.1)) return false;

  const Mat18 F = transition_jacobian(s, accel, gyro, dt);
  const Mat3 R = s.attitude();

  s.p += s.v * dt;
  s.v += (sim::kGravity + R * (accel - s.ba)) * dt;
  s.R_ref = s.R_ref * exp_so3((gyro - s.bg) * dt);
  s.t += dt;

  Mat18 Qd = Mat18::Zero();
  Qd.block<3, 3>(kV, kV) = R * q.sigma_a * R.transpose() * dt;
  Qd.block<3, 3>(kPhi, kPhi) = R * q.sigma_g * R.transpose() * dt;
  Qd.block<3, 3>(kBa, kBa) = q.sigma_ba * dt;
  Qd.block<3, 3>(kBg, kBg) = q.sigma_bg * dt;
  Qd.block<3, 3>(kEw, kEw) = q.sigma_w * dt;

  s.P = F * s.P * F.transpose() + Qd;
  s.symmetrize();
  return true;
}

Vec3 airflow_measurement_model(const FilterState& s, const Vec18& err,
                               const windmap::WindMap* map) {
  const Vec3 p = s.p + err.segment<3>(kP);
  const Vec3 v = s.v + err.segment<3>(kV);
  const Mat3 R = exp_so3(s.phi + err.segment<3>(kPhi)) * s.R_ref;
  const Vec3 ew = s.ew + err.segment<3>(kEw);
  Vec3 wind = ew;
  if (map) wind += map->query(p).mean;
  return R.transpose() * (wind - v);
}

bool update_airflow(FilterState& s, const Vec3& meas, const Mat3& sigma_lstm,
                    const windmap::WindMap* map) {
  const Mat3 R = s.attitude();
  Vec3 wind = s.ew;
  Mat3 sigma_map = Mat3::Zero();
  Mat3 map_jac = Mat3::Zero();
  if (map) {
    const windmap::QueryResult q = map->query(s.p);
    wind += q.mean;
    sigma_map = q.var.asDiagonal();
    map_jac = map->mean_jacobian(s.p);
  }

  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(3, kErrDim);
  H.block<3, 3>(0, kP) = R.transpose() * map_jac;
  H.block<3, 3>(0, kV) = -R.transpose();
  H.block<3, 3>(0, kPhi) = R.transpose() * hat(wind - s.v);
  H.block<3, 3>(0, kEw) = R.transpose();

  // non-additive map noise: eta_m enters through R^T, so it contributes
  // J Sigma_M J^T to the innovation covariance
  const Mat3 R_eff = sigma_lstm + R.transpose() * sigma_map * R;
  const Vec3 predicted = R.transpose() * (wind - s.v);
  return apply_update(s, H, meas - predicted, R_eff);
}

bool update_odometry(FilterState& s, const OdomMeasurement& meas) {
  int rows = 0;
  if (meas.use_p) rows += 3;
  if (meas.use_v) rows += 3;
  if (meas.use_att) rows += 3;
  if (rows == 0) return false;

  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(rows, kErrDim);
  Eigen::VectorXd r(rows);
  Eigen::MatrixXd R_eff = Eigen::MatrixXd::Zero(rows, rows);
  int at = 0;
  if (meas.use_p) {
    H.block<3, 3>(at, kP).setIdentity();
    r.segment<3>(at) = meas.p - s.p;
    R_eff.block<3, 3>(at, at) = meas.cov_p;
    at += 3;
  }
  if (meas.use_v) {
    H.block<3, 3>(at, kV).setIdentity();
    r.segment<3>(at) = meas.v - s.v;
    R_eff.block<3, 3>(at, at) = meas.cov_v;
    at += 3;
  }
  if (meas.use_att) {
    // attitude residual in the error state: phi_m = log(R_m R_ref^T)
    H.block<3, 3>(at, kPhi).setIdentity();
    r.segment<3>(at) = log_so3(meas.R * s.R_ref.transpose()) - s.phi;
    R_eff.block<3, 3>(at, at) = meas.cov_att;
  }
  return apply_update(s, H, r, R_eff);
}

}  // namespace aio::ekf
