// Kinematic ground-truth trajectory generation. Trajectories are analytic
// (parametric figures or minimum-jerk waypoint interpolation) so position,
// velocity and acceleration are mutually consistent by construction.
#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "aio/so3.hpp"

namespace aio::sim {

enum class Figure { Hover, Circle, Lissajous, Waypoints };
enum class YawProfile { Fixed, Tracking, Sinusoid };

struct TrajectorySpec {
  double duration_s = 30.0;
  double rate_hz = 200.0;
  Figure figure = Figure::Circle;
  Vec3 center{0.0, 0.0, 1.5};
  double radius_m = 1.0;            // circle
  Vec3 lissajous_amp{1.5, 1.0, 0.3};
  Vec3 lissajous_freq{1.0, 2.0, 3.0};  // relative frequencies
  std::vector<Vec3> waypoints;
  std::vector<double> waypoint_times;  // arrival time of each waypoint
  double peak_speed_mps = 1.5;
  YawProfile yaw = YawProfile::Fixed;
  double yaw0_rad = 0.0;
  double yaw_amp_rad = 0.5;
  double yaw_freq_hz = 0.2;

  void validate() const;
};

struct TruthPoint {
  double t = 0.0;
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec3 a = Vec3::Zero();
  Mat3 R = Mat3::Identity();       // body-to-world
  Vec3 omega = Vec3::Zero();       // body frame angular rate
};

using Trajectory = std::vector<TruthPoint>;

struct TrajectoryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Samples the spec at its rate. Throws TrajectoryError when waypoint timing
/// would require exceeding the spec's peak speed.
Trajectory generate_trajectory(const TrajectorySpec& spec);

}  // namespace aio::sim
