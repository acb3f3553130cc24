// Time-indexed record of everything the pipeline consumes: IMU, whisker
// deflections, throttle, odometry (with availability), and ground truth.
#pragma once

#include <string>
#include <vector>

#include "aio/so3.hpp"

namespace aio::sim {

struct SensorRow {
  double t = 0.0;
  Vec3 accel = Vec3::Zero();   // measured specific force, body frame
  Vec3 gyro = Vec3::Zero();    // measured angular rate, body frame
  Eigen::Matrix<double, 8, 1> whisker = Eigen::Matrix<double, 8, 1>::Zero();
  Eigen::Matrix<double, 6, 1> throttle = Eigen::Matrix<double, 6, 1>::Zero();
  bool odom_available = true;
  Vec3 odom_p = Vec3::Zero();
  Vec3 odom_v = Vec3::Zero();
  Mat3 odom_R = Mat3::Identity();
  Vec3 gt_p = Vec3::Zero();
  Vec3 gt_v = Vec3::Zero();
  Mat3 gt_R = Mat3::Identity();
  Vec3 gt_wind = Vec3::Zero();  // total wind (mean field + turbulence) at gt_p
  Vec3 gt_ba = Vec3::Zero();
  Vec3 gt_bg = Vec3::Zero();
};

struct SensorLog {
  double rate_hz = 200.0;
  bool failure_applied = false;
  double failure_time_s = -1.0;
  std::vector<SensorRow> rows;

  double dt() const { return 1.0 / rate_hz; }
};

/// CSV with a `# aio-sensor-log v1 ...` metadata line, then a header row.
/// Rotations are stored as SO(3) log-map vectors.
void write_sensor_log_csv(const SensorLog& log, const std::string& path);
SensorLog read_sensor_log_csv(const std::string& path);

}  // namespace aio::sim
