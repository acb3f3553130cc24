#include "aio/sim/trajectory.hpp"

#include <cmath>

namespace aio::sim {

namespace {

struct Kin {
  Vec3 p, v, a;
};

// Minimum-jerk interpolation scalar: s(0)=0, s(1)=1, zero velocity and
// acceleration at both ends. Peak of s' is 1.875 at tau = 0.5.
void min_jerk(double tau, double& s, double& sd, double& sdd) {
  const double t2 = tau * tau, t3 = t2 * tau, t4 = t3 * tau, t5 = t4 * tau;
  s = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
  sd = 30.0 * t2 - 60.0 * t3 + 30.0 * t4;
  sdd = 60.0 * tau - 180.0 * t2 + 120.0 * t3;
}

Kin eval_waypoints(const TrajectorySpec& spec, double t) {
  const auto& wp = spec.waypoints;
  const auto& wt = spec.waypoint_times;
  if (t <= wt.front()) return {wp.front(), Vec3::Zero(), Vec3::Zero()};
  if (t >= wt.back()) return {wp.back(), Vec3::Zero(), Vec3::Zero()};
  std::size_t i = 0;
  while (i + 1 < wt.size() && wt[i + 1] < t) ++i;
  const double T = wt[i + 1] - wt[i];
  const double tau = (t - wt[i]) / T;
  double s, sd, sdd;
  min_jerk(tau, s, sd, sdd);
  const Vec3 d = wp[i + 1] - wp[i];
  return {wp[i] + s * d, (sd / T) * d, (sdd / (T * T)) * d};
}

Kin eval_figure(const TrajectorySpec& spec, double t) {
  switch (spec.figure) {
    case Figure::Hover:
      return {spec.center, Vec3::Zero(), Vec3::Zero()};
    case Figure::Circle: {
      const double w = spec.peak_speed_mps / spec.radius_m;
      const double c = std::cos(w * t), s = std::sin(w * t);
      const double r = spec.radius_m;
      return {spec.center + Vec3(r * c, r * s, 0.0),
              Vec3(-r * w * s, r * w * c, 0.0),
              Vec3(-r * w * w * c, -r * w * w * s, 0.0)};
    }
    case Figure::Lissajous: {
      const Vec3& A = spec.lissajous_amp;
      const Vec3& f = spec.lissajous_freq;
      // base rate chosen so the velocity-amplitude bound equals peak speed
      const double norm = std::sqrt((A.array() * f.array()).square().sum());
      const double w0 = spec.peak_speed_mps / std::max(norm, 1e-9);
      Kin k;
      const Vec3 phase(M_PI / 2.0, 0.0, 0.0);
      for (int i = 0; i < 3; ++i) {
        const double wi = w0 * f[i];
        const double arg = wi * t + phase[i];
        k.p[i] = spec.center[i] + A[i] * std::sin(arg);
        k.v[i] = A[i] * wi * std::cos(arg);
        k.a[i] = -A[i] * wi * wi * std::sin(arg);
      }
      return k;
    }
    case Figure::Waypoints:
      return eval_waypoints(spec, t);
  }
  return {};
}

}  // namespace

void TrajectorySpec::validate() const {
  if (duration_s <= 0.0) throw TrajectoryError("duration must be positive");
  if (rate_hz <= 0.0) throw TrajectoryError("rate must be positive");
  if (peak_speed_mps < 0.0 || peak_speed_mps > 3.0)
    throw TrajectoryError("peak speed must be in [0, 3] m/s");
  if (figure == Figure::Circle && radius_m <= 0.0)
    throw TrajectoryError("circle radius must be positive");
  if (figure == Figure::Waypoints) {
    if (waypoints.size() < 2 || waypoints.size() != waypoint_times.size())
      throw TrajectoryError("waypoints and waypoint_times must match, size >= 2");
    for (std::size_t i = 0; i + 1 < waypoint_times.size(); ++i) {
      const double T = waypoint_times[i + 1] - waypoint_times[i];
      if (T <= 0.0) throw TrajectoryError("waypoint times must be increasing");
      const double need = 1.875 * (waypoints[i + 1] - waypoints[i]).norm() / T;
      if (need > peak_speed_mps)
        throw TrajectoryError(
            "waypoint segment " + std::to_string(i) + " needs " +
            std::to_string(need) + " m/s, above peak speed");
    }
  }
}

Trajectory generate_trajectory(const TrajectorySpec& spec) {
  spec.validate();
  const double dt = 1.0 / spec.rate_hz;
  const std::size_t n = static_cast<std::size_t>(std::llround(spec.duration_s * spec.rate_hz));
  Trajectory out;
  out.reserve(n);
  double held_yaw = spec.yaw0_rad;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * dt;
    const Kin kin = eval_figure(spec, t);
    double yaw = spec.yaw0_rad, yaw_rate = 0.0;
    switch (spec.yaw) {
      case YawProfile::Fixed:
        break;
      case YawProfile::Sinusoid: {
        const double w = 2.0 * M_PI * spec.yaw_freq_hz;
        yaw = spec.yaw0_rad + spec.yaw_amp_rad * std::sin(w * t);
        yaw_rate = spec.yaw_amp_rad * w * std::cos(w * t);
        break;
      }
      case YawProfile::Tracking: {
        const double sp2 = kin.v.x() * kin.v.x() + kin.v.y() * kin.v.y();
        if (sp2 > 1e-4) {
          yaw = std::atan2(kin.v.y(), kin.v.x());
          yaw_rate = (kin.v.x() * kin.a.y() - kin.v.y() * kin.a.x()) / sp2;
          held_yaw = yaw;
        } else {
          yaw = held_yaw;
        }
        break;
      }
    }
    TruthPoint pt;
    pt.t = t;
    pt.p = kin.p;
    pt.v = kin.v;
    pt.a = kin.a;
    pt.R = rot_z(yaw);
    pt.omega = Vec3(0.0, 0.0, yaw_rate);  // yaw-only attitude
    out.push_back(pt);
  }
  return out;
}

}  // namespace aio::sim
