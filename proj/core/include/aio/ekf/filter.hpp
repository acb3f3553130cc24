// Airflow-inertial error-state EKF. 18-dimensional error state ordered as
// (p, v, phi, b_a, b_g, e_w); the composed attitude is exp(phi^) * R_ref and
// phi is reset to zero after every update.
#pragma once

#include <optional>

#include "aio/sim/sensors.hpp"
#include "aio/so3.hpp"
#include "aio/windmap/wind_map.hpp"

namespace aio::ekf {

inline constexpr int kErrDim = 18;
inline constexpr int kP = 0, kV = 3, kPhi = 6, kBa = 9, kBg = 12, kEw = 15;

using Mat18 = Eigen::Matrix<double, kErrDim, kErrDim>;
using Vec18 = Eigen::Matrix<double, kErrDim, 1>;

struct FilterState {
  double t = 0.0;
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Mat3 R_ref = Mat3::Identity();
  Vec3 phi = Vec3::Zero();  // zero except transiently inside updates
  Vec3 ba = Vec3::Zero();
  Vec3 bg = Vec3::Zero();
  Vec3 ew = Vec3::Zero();
  Mat18 P = Mat18::Identity();

  Mat3 attitude() const { return exp_so3(phi) * R_ref; }
  void symmetrize() { P = 0.5 * (P + P.transpose()).eval(); }
};

struct ProcessNoiseSpec {
  Mat3 sigma_a = Mat3::Zero();   // accel white noise PSD
  Mat3 sigma_g = Mat3::Zero();
  Mat3 sigma_ba = Mat3::Zero();  // bias random walk PSD
  Mat3 sigma_bg = Mat3::Zero();
  Mat3 sigma_w = Mat3::Zero();   // wind error random walk; zero with a map

  static ProcessNoiseSpec from_densities(const sim::SensorNoiseSpec& n,
                                         double wind_rw_density);
};

struct OdomMeasurement {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Mat3 R = Mat3::Identity();
  Mat3 cov_p = Mat3::Identity();
  Mat3 cov_v = Mat3::Identity();
  Mat3 cov_att = Mat3::Identity();
  bool use_p = true;
  bool use_v = true;
  bool use_att = true;
};

/// Forward-Euler prediction. Returns false (state untouched) on a non-finite
/// IMU sample. dt must be in (0, 0.1].
bool predict(FilterState& s, const Vec3& accel, const Vec3& gyro, double dt,
             const ProcessNoiseSpec& q);

/// Exact Jacobian of the discrete error-state transition, exposed for the
/// finite-difference oracle.
Mat18 transition_jacobian(const FilterState& s, const Vec3& accel,
                          const Vec3& gyro, double dt);

/// Airflow measurement: z = R^T (M(p) + e_w - v) in the body frame, with the
/// position-dependent map uncertainty folded into the innovation covariance
/// (non-additive noise). Pass map = nullptr in mapping / no-map modes.
/// Returns false if the innovation covariance is not invertible.
bool update_airflow(FilterState& s, const Vec3& meas, const Mat3& sigma_lstm,
                    const windmap::WindMap* map);

/// Predicted airflow measurement at an explicit error-state perturbation,
/// exposed for the Jacobian oracle.
Vec3 airflow_measurement_model(const FilterState& s, const Vec18& err,
                               const windmap::WindMap* map);

bool update_odometry(FilterState& s, const OdomMeasurement& meas);

}  // namespace aio::ekf
