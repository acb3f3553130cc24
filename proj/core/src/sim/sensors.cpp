#include "aio/sim/sensors.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "aio/rng.hpp"

namespace aio::sim {

void SensorNoiseSpec::validate() const {
  const double d[] = {accel_noise_density, gyro_noise_density,
                      accel_bias_rw_density, gyro_bias_rw_density,
                      accel_bias_init, gyro_bias_init, whisker_noise_std_rad,
                      odom_pos_std_m, odom_vel_std_mps, odom_att_std_rad};
  for (double x : d) {
    if (x < 0.0 || !std::isfinite(x))
      throw std::invalid_argument("noise densities must be finite and >= 0");
  }
}

WhiskerParams::WhiskerParams() {
  // Sensors yawed 90 deg apart, tilted 30 deg off vertical so the four of
  // them jointly observe all three airflow components.
  for (int i = 0; i < 4; ++i) {
    mounts[i] = rot_z(i * M_PI / 2.0) *
                exp_so3(Vec3(0.0, M_PI / 6.0, 0.0));
  }
}

Eigen::Matrix<double, 8, 1> WhiskerParams::deflections(
    const Vec3& airflow_body, const Eigen::Matrix<double, 6, 1>& throttle) const {
  const Vec3 downwash = propwash_gain * throttle.mean() * Vec3(0.0, 0.0, -1.0);
  const Vec3 local = airflow_body + downwash;
  Eigen::Matrix<double, 8, 1> out = Eigen::Matrix<double, 8, 1>::Zero();
  for (int i = 0; i < 4; ++i) {
    const Vec3 q = mounts[i].transpose() * local;
    const double speed = q.norm();
    if (speed < 1e-12) continue;
    const double mag = theta_max_rad * speed * speed /
                       (speed * speed + half_speed_mps * half_speed_mps);
    out[2 * i] = mag * q.x() / speed;
    out[2 * i + 1] = mag * q.y() / speed;
  }
  return out;
}

SensorLog synthesize_sensors(const Trajectory& truth,
                             const WindFieldSpec& wind,
                             const SensorNoiseSpec& noise,
                             const WhiskerParams& whisker,
                             double failure_time_s,
                             std::uint64_t seed,
                             const ThrottleModel& throttle) {
  if (truth.size() < 2) throw std::invalid_argument("trajectory too short");
  wind.validate();
  noise.validate();

  SensorLog log;
  log.rate_hz = 1.0 / (truth[1].t - truth[0].t);
  const double dt = log.dt();
  const double duration = truth.back().t + dt;
  log.failure_applied = failure_time_s >= 0.0 && failure_time_s < duration;
  log.failure_time_s = log.failure_applied ? failure_time_s : -1.0;

  auto rng = make_rng(seed, "synthesize-sensors");
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto draw3 = [&]() { return Vec3(gauss(rng), gauss(rng), gauss(rng)); };

  Vec3 ba = noise.accel_bias_init * draw3();
  Vec3 bg = noise.gyro_bias_init * draw3();
  const double accel_std = noise.accel_noise_density * std::sqrt(log.rate_hz);
  const double gyro_std = noise.gyro_noise_density * std::sqrt(log.rate_hz);
  const double ba_step = noise.accel_bias_rw_density * std::sqrt(dt);
  const double bg_step = noise.gyro_bias_rw_density * std::sqrt(dt);

  // Ornstein-Uhlenbeck turbulence, started from its stationary distribution.
  const double alpha = std::exp(-dt / wind.turbulence_corr_time_s);
  const double ou_step = wind.turbulence_std_mps * std::sqrt(1.0 - alpha * alpha);
  Vec3 turb = wind.turbulence_std_mps * draw3();

  log.rows.reserve(truth.size());
  for (const auto& pt : truth) {
    SensorRow r;
    r.t = pt.t;
    r.gt_p = pt.p;
    r.gt_v = pt.v;
    r.gt_R = pt.R;
    r.gt_ba = ba;
    r.gt_bg = bg;

    const Vec3 w_total = wind_at(wind, pt.p) + turb;
    r.gt_wind = w_total;

    r.accel = pt.R.transpose() * (pt.a - kGravity) + ba + accel_std * draw3();
    r.gyro = pt.omega + bg + gyro_std * draw3();

    const double thrust_z = (pt.R.transpose() * (pt.a - kGravity)).z();
    const double u = std::clamp(
        throttle.hover + throttle.gain_per_mps2 * (thrust_z - 9.81), 0.0, 1.0);
    r.throttle.setConstant(u);

    const Vec3 airflow_body = pt.R.transpose() * (w_total - pt.v);
    r.whisker = whisker.deflections(airflow_body, r.throttle);
    for (int i = 0; i < 8; ++i) r.whisker[i] += noise.whisker_noise_std_rad * gauss(rng);

    r.odom_available = !log.failure_applied || pt.t < failure_time_s;
    if (r.odom_available) {
      r.odom_p = pt.p + noise.odom_pos_std_m * draw3();
      r.odom_v = pt.v + noise.odom_vel_std_mps * draw3();
      r.odom_R = exp_so3(noise.odom_att_std_rad * draw3()) * pt.R;
    }

    log.rows.push_back(r);

    ba += ba_step * draw3();
    bg += bg_step * draw3();
    turb = alpha * turb + ou_step * draw3();
  }
  return log;
}

}  // namespace aio::sim
