// Synthetic sensor generation: IMU with white noise and random-walk biases,
// whisker deflections from a saturating drag model with propwash coupling,
// throttle channels, and noisy odometry with failure injection.
#pragma once

#include <array>
#include <cstdint>

#include "aio/sim/sensor_log.hpp"
#include "aio/sim/trajectory.hpp"
#include "aio/sim/wind_field.hpp"

namespace aio::sim {

inline const Vec3 kGravity{0.0, 0.0, -9.81};  // world z up

struct SensorNoiseSpec {
  double accel_noise_density = 0.02;    // m/s^2 / sqrt(Hz)
  double gyro_noise_density = 0.002;    // rad/s / sqrt(Hz)
  double accel_bias_rw_density = 0.003; // m/s^2 * sqrt(s) per sqrt(s)
  double gyro_bias_rw_density = 3e-4;   // rad/s * sqrt(s) per sqrt(s)
  double accel_bias_init = 0.05;        // per-axis std of the initial bias
  double gyro_bias_init = 0.005;
  double whisker_noise_std_rad = 0.002;
  double odom_pos_std_m = 0.005;
  double odom_vel_std_mps = 0.02;
  double odom_att_std_rad = 0.002;

  void validate() const;

  SensorNoiseSpec& zero() {
    *this = SensorNoiseSpec{};
    accel_noise_density = gyro_noise_density = 0.0;
    accel_bias_rw_density = gyro_bias_rw_density = 0.0;
    accel_bias_init = gyro_bias_init = 0.0;
    whisker_noise_std_rad = 0.0;
    odom_pos_std_m = odom_vel_std_mps = odom_att_std_rad = 0.0;
    return *this;
  }
};

// Forward model for the four whisker sensors. Each sensor has a fixed
// mounting rotation (sensor frame -> body frame); the local airflow is the
// relative airflow plus a throttle-dependent downwash along body -z. The rod
// deflection follows a saturating magnitude curve applied to the projection
// of the local airflow onto the sensor's two bending axes.
struct WhiskerParams {
  std::array<Mat3, 4> mounts;       // sensor -> body
  double propwash_gain = 1.2;       // m/s of downwash per unit mean throttle
  double theta_max_rad = 0.6;       // saturation deflection
  double half_speed_mps = 2.5;      // flow speed at half-saturation

  WhiskerParams();

  /// Deflections (theta_x, theta_y) per sensor for a body-frame relative
  /// airflow and throttle vector. Noise-free.
  Eigen::Matrix<double, 8, 1> deflections(
      const Vec3& airflow_body, const Eigen::Matrix<double, 6, 1>& throttle) const;
};

struct ThrottleModel {
  double hover = 0.5;               // normalized throttle at 1 g thrust
  double gain_per_mps2 = 0.03;      // throttle per m/s^2 of specific thrust
};

/// Produces the full sensor log for a ground-truth trajectory. Odometry rows
/// are available while t < failure_time_s; a failure time at or beyond the
/// log duration means no failure (flagged in the log metadata).
SensorLog synthesize_sensors(const Trajectory& truth,
                             const WindFieldSpec& wind,
                             const SensorNoiseSpec& noise,
                             const WhiskerParams& whisker,
                             double failure_time_s,
                             std::uint64_t seed,
                             const ThrottleModel& throttle = {});

}  // namespace aio::sim
