#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "aio/airflow/lstm.hpp"
#include "aio/ekf/filter.hpp"
#include "aio/ekf/runner.hpp"
#include "aio/rng.hpp"
#include "aio/sim/sensors.hpp"
#include "aio/sim/trajectory.hpp"
#include "aio/sim/wind_field.hpp"

using namespace aio;
using namespace aio::ekf;

namespace {

FilterState random_state(std::uint64_t seed) {
  auto rng = make_rng(seed, "state");
  std::normal_distribution<double> n(0.0, 1.0);
  FilterState s;
  s.p = Vec3(n(rng), n(rng), 1.5 + 0.3 * n(rng));
  s.v = Vec3(n(rng), n(rng), n(rng));
  s.R_ref = exp_so3(Vec3(n(rng), n(rng), n(rng)));
  s.ba = 0.05 * Vec3(n(rng), n(rng), n(rng));
  s.bg = 0.01 * Vec3(n(rng), n(rng), n(rng));
  s.ew = Vec3(n(rng), n(rng), n(rng));
  Eigen::Matrix<double, kErrDim, kErrDim> A;
  for (int i = 0; i < kErrDim; ++i)
    for (int j = 0; j < kErrDim; ++j) A(i, j) = 0.05 * n(rng);
  s.P = A * A.transpose() + 0.01 * Mat18::Identity();
  return s;
}

// Left-composition perturbation matching the error-state ordering.
FilterState apply_error(const FilterState& s, const Vec18& err) {
  FilterState out = s;
  out.p += err.segment<3>(kP);
  out.v += err.segment<3>(kV);
  out.R_ref = exp_so3(err.segment<3>(kPhi)) * s.R_ref;
  out.ba += err.segment<3>(kBa);
  out.bg += err.segment<3>(kBg);
  out.ew += err.segment<3>(kEw);
  return out;
}

Vec18 state_error(const FilterState& a, const FilterState& b) {
  Vec18 e;
  e.segment<3>(kP) = a.p - b.p;
  e.segment<3>(kV) = a.v - b.v;
  e.segment<3>(kPhi) = log_so3(a.attitude() * b.attitude().transpose());
  e.segment<3>(kBa) = a.ba - b.ba;
  e.segment<3>(kBg) = a.bg - b.bg;
  e.segment<3>(kEw) = a.ew - b.ew;
  return e;
}

sim::SensorLog hover_log(double duration_s, std::uint64_t seed,
                         const sim::SensorNoiseSpec& noise,
                         const sim::WindFieldSpec& wind = {}) {
  sim::TrajectorySpec spec;
  spec.figure = sim::Figure::Hover;
  spec.duration_s = duration_s;
  return sim::synthesize_sensors(sim::generate_trajectory(spec), wind, noise,
                                 sim::WhiskerParams{}, -1.0, seed);
}

airflow::LstmRegressor random_lstm(std::uint64_t seed) {
  auto model = airflow::make_empty_regressor();
  auto rng = make_rng(seed, "lstm");
  std::normal_distribution<double> n(0.0, 0.2);
  Eigen::VectorXd theta(model.num_params());
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] = n(rng);
  model.set_params_flat(theta);
  model.norm_mean.setZero();
  model.norm_std.setOnes();
  model.feature_mask.setOnes();
  return model;
}

// 0.025 / 0.975 chi-square quantiles for 6 degrees of freedom.
constexpr double kChi6Lo = 1.237344;
constexpr double kChi6Hi = 14.449375;

}  // namespace

TEST_CASE("hover equilibrium: mean unchanged over 1000 steps") {
  FilterState s;
  s.p = Vec3(0.3, -0.2, 1.5);
  s.R_ref = exp_so3(Vec3(0, 0, 0.7));
  const Vec3 accel = -(s.R_ref.transpose() * sim::kGravity);
  ProcessNoiseSpec q;
  for (int k = 0; k < 1000; ++k)
    REQUIRE(predict(s, accel, Vec3::Zero(), 0.005, q));
  CHECK((s.p - Vec3(0.3, -0.2, 1.5)).norm() < 1e-9);
  CHECK(s.v.norm() < 1e-9);
  CHECK((s.attitude() - exp_so3(Vec3(0, 0, 0.7))).norm() < 1e-9);
}

TEST_CASE("zero process noise propagates covariance as F P0 F^T exactly") {
  FilterState s = random_state(1);
  const Mat18 P0 = s.P;
  const Vec3 accel(0.3, -0.1, 9.7), gyro(0.02, -0.05, 0.1);
  const Mat18 F = transition_jacobian(s, accel, gyro, 0.005);
  REQUIRE(predict(s, accel, gyro, 0.005, ProcessNoiseSpec{}));
  const Mat18 expect = F * P0 * F.transpose();
  CHECK((s.P - 0.5 * (expect + expect.transpose())).norm() < 1e-14 * expect.norm());
  // symmetry and PSD
  CHECK((s.P - s.P.transpose()).norm() < 1e-9 * s.P.norm());
  Eigen::SelfAdjointEigenSolver<Mat18> es(s.P);
  CHECK(es.eigenvalues().minCoeff() > -1e-9 * s.P.trace());
}

TEST_CASE("transition Jacobian matches finite differences at 100 states") {
  const double eps = 1e-6, dt = 0.005;
  auto rng = make_rng(2, "imu");
  std::normal_distribution<double> n(0.0, 1.0);
  ProcessNoiseSpec q;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const FilterState s = random_state(100 + trial);
    const Vec3 accel(n(rng), n(rng), 9.81 + n(rng));
    const Vec3 gyro(0.3 * n(rng), 0.3 * n(rng), 0.3 * n(rng));
    const Mat18 F = transition_jacobian(s, accel, gyro, dt);
    for (int j = 0; j < kErrDim; ++j) {
      FilterState sp = apply_error(s, eps * Vec18::Unit(j));
      FilterState sm = apply_error(s, -eps * Vec18::Unit(j));
      REQUIRE(predict(sp, accel, gyro, dt, q));
      REQUIRE(predict(sm, accel, gyro, dt, q));
      const Vec18 fd = state_error(sp, sm) / (2 * eps);
      worst = std::max(
          worst, (fd - F.col(j)).norm() / std::max(1.0, F.col(j).norm()));
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("predict rejects non-finite input and bad dt without touching state") {
  FilterState s = random_state(3);
  const FilterState before = s;
  ProcessNoiseSpec q;
  const double nan = std::nan("");
  CHECK(!predict(s, Vec3(nan, 0, 0), Vec3::Zero(), 0.005, q));
  CHECK(!predict(s, Vec3::Zero(), Vec3(0, nan, 0), 0.005, q));
  CHECK(!predict(s, Vec3::Zero(), Vec3::Zero(), 0.0, q));
  CHECK(!predict(s, Vec3::Zero(), Vec3::Zero(), 0.2, q));
  CHECK(s.p == before.p);
  CHECK(s.P == before.P);
  CHECK(s.R_ref == before.R_ref);
}

TEST_CASE("airflow update with zero innovation leaves the mean unchanged") {
  FilterState s = random_state(4);
  s.v.setZero();
  s.ew.setZero();
  const Mat3 R0 = s.attitude();
  const Vec3 p0 = s.p, ba0 = s.ba;
  REQUIRE(update_airflow(s, Vec3::Zero(), 1e-9 * Mat3::Identity(), nullptr));
  CHECK((s.p - p0).norm() < 1e-12);
  CHECK(s.v.norm() < 1e-12);
  CHECK(s.ew.norm() < 1e-12);
  CHECK((s.ba - ba0).norm() < 1e-12);
  CHECK((s.attitude() - R0).norm() < 1e-12);
  CHECK(s.phi.norm() == 0.0);  // reset contract
}

TEST_CASE("airflow update equals a Joseph update built from an FD Jacobian") {
  auto run_case = [](std::uint64_t seed, const windmap::WindMap* map) {
    const FilterState s = random_state(seed);
    const Mat3 sigma_lstm = 0.02 * Mat3::Identity();
    const Vec3 meas = airflow_measurement_model(s, Vec18::Zero(), map) +
                      Vec3(0.05, -0.1, 0.02);

    // numerical H from the exposed measurement model
    const double eps = 1e-6;
    Eigen::Matrix<double, 3, kErrDim> H;
    for (int j = 0; j < kErrDim; ++j)
      H.col(j) = (airflow_measurement_model(s, eps * Vec18::Unit(j), map) -
                  airflow_measurement_model(s, -eps * Vec18::Unit(j), map)) /
                 (2 * eps);

    Mat3 sigma_map = Mat3::Zero();
    if (map) sigma_map = map->query(s.p).var.asDiagonal();
    const Mat3 R = s.attitude();
    const Mat3 R_eff = sigma_lstm + R.transpose() * sigma_map * R;
    const Eigen::Matrix3d S = H * s.P * H.transpose() + R_eff;
    const Eigen::Matrix<double, kErrDim, 3> K =
        s.P * H.transpose() * S.inverse();
    const Vec18 delta =
        K * (meas - airflow_measurement_model(s, Vec18::Zero(), map));
    const FilterState expect_mean = apply_error(s, delta);
    const Mat18 IKH = Mat18::Identity() - K * H;
    const Mat18 expect_P =
        IKH * s.P * IKH.transpose() + K * R_eff * K.transpose();

    FilterState u = s;
    REQUIRE(update_airflow(u, meas, sigma_lstm, map));
    CHECK(state_error(u, expect_mean).norm() < 1e-6);
    CHECK((u.P - 0.5 * (expect_P + expect_P.transpose())).norm() <
          1e-6 * u.P.norm());
  };

  SUBCASE("without a map") {
    for (int t = 0; t < 20; ++t) run_case(200 + t, nullptr);
  }
  SUBCASE("with a map (GP-mean position Jacobian active)") {
    sim::WindFieldSpec field;
    sim::JetSpec jet;
    jet.origin = Vec3(1.0, 0.5, 1.5);
    jet.direction = Vec3(0, 1, 0);
    jet.core_speed_mps = 2.0;
    jet.radial_decay_m = 1.5;
    jet.axial_decay_m = 3.0;
    field.jets.push_back(jet);
    auto rng = make_rng(5, "map-data");
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    windmap::WindDataset data;
    data.positions.resize(100, 3);
    data.wind.resize(100, 3);
    for (int i = 0; i < 100; ++i) {
      const Vec3 p(u(rng), u(rng), 1.5 + 0.2 * u(rng));
      data.positions.row(i) = p.transpose();
      data.wind.row(i) = sim::wind_at(field, p).transpose();
    }
    const auto map = windmap::fit_sparse(data, windmap::KernelParams{1.0, 1.0, 0.02},
                                         20, windmap::GpFitConfig{.seed = 5});
    for (int t = 0; t < 20; ++t) run_case(300 + t, &map);
  }
}

TEST_CASE("odometry update: exact measurement keeps the mean, shrinks P") {
  FilterState s = random_state(6);
  const FilterState before = s;
  OdomMeasurement m;
  m.p = s.p;
  m.v = s.v;
  m.R = s.attitude();
  m.cov_p = 1e-4 * Mat3::Identity();
  m.cov_v = 1e-4 * Mat3::Identity();
  m.cov_att = 1e-5 * Mat3::Identity();
  REQUIRE(update_odometry(s, m));
  CHECK(state_error(s, before).norm() < 1e-12);
  CHECK(s.P.trace() < before.P.trace());
}

TEST_CASE("odometry update matches a hand-built linear Kalman step") {
  for (int t = 0; t < 20; ++t) {
    const FilterState s = random_state(400 + t);
    OdomMeasurement m;
    m.p = s.p + Vec3(0.02, -0.01, 0.03);
    m.v = s.v + Vec3(-0.05, 0.04, 0.01);
    m.R = exp_so3(Vec3(0.01, -0.02, 0.015)) * s.attitude();
    m.cov_p = 1e-4 * Mat3::Identity();
    m.cov_v = 4e-4 * Mat3::Identity();
    m.cov_att = 1e-5 * Mat3::Identity();

    // H has identity blocks on (p, v, phi); the attitude residual is the
    // left error log(R_m R_ref^T)
    Eigen::Matrix<double, 9, kErrDim> H = Eigen::Matrix<double, 9, kErrDim>::Zero();
    H.block<3, 3>(0, kP).setIdentity();
    H.block<3, 3>(3, kV).setIdentity();
    H.block<3, 3>(6, kPhi).setIdentity();
    Eigen::Matrix<double, 9, 1> r;
    r.segment<3>(0) = m.p - s.p;
    r.segment<3>(3) = m.v - s.v;
    r.segment<3>(6) = log_so3(m.R * s.R_ref.transpose());
    Eigen::Matrix<double, 9, 9> R_eff = Eigen::Matrix<double, 9, 9>::Zero();
    R_eff.block<3, 3>(0, 0) = m.cov_p;
    R_eff.block<3, 3>(3, 3) = m.cov_v;
    R_eff.block<3, 3>(6, 6) = m.cov_att;
    const Eigen::Matrix<double, 9, 9> S = H * s.P * H.transpose() + R_eff;
    const Eigen::Matrix<double, kErrDim, 9> K =
        s.P * H.transpose() * S.inverse();
    const Vec18 delta = K * r;
    const FilterState expect_mean = apply_error(s, delta);

    FilterState u = s;
    REQUIRE(update_odometry(u, m));
    CHECK(state_error(u, expect_mean).norm() < 1e-9);
    CHECK(u.phi.norm() == 0.0);
  }
}

TEST_CASE("position-only odometry leaves independent blocks untouched") {
  FilterState s = random_state(7);
  s.P.setZero();
  s.P.diagonal().setConstant(0.1);  // block-diagonal: no cross correlations
  const FilterState before = s;
  OdomMeasurement m;
  m.p = s.p + Vec3(0.1, 0, 0);
  m.use_v = false;
  m.use_att = false;
  m.cov_p = 1e-4 * Mat3::Identity();
  REQUIRE(update_odometry(s, m));
  CHECK((s.p - before.p).norm() > 0.05);  // p moved toward the measurement
  CHECK(s.v == before.v);
  CHECK(s.ba == before.ba);
  CHECK(s.bg == before.bg);
  CHECK(s.ew == before.ew);
  CHECK((s.attitude() - before.attitude()).norm() < 1e-15);
}

TEST_CASE("mapping mode pulls e_w to a uniform true wind within 0.2 m/s") {
  // near-uniform [0, 2, 0] wind: one jet with very long decay lengths
  sim::WindFieldSpec field;
  sim::JetSpec jet;
  jet.origin = Vec3(0, -50, 1.5);
  jet.direction = Vec3(0, 1, 0);
  jet.core_speed_mps = 2.0;
  jet.radial_decay_m = 1e4;
  jet.axial_decay_m = 1e6;
  field.jets.push_back(jet);

  sim::SensorNoiseSpec noise;
  const auto log = hover_log(15.0, 8, noise, field);

  FilterState s;
  s.p = log.rows.front().odom_p;
  s.v = log.rows.front().odom_v;
  s.R_ref = log.rows.front().odom_R;
  s.P.setZero();
  s.P.block<3, 3>(kP, kP) = noise.odom_pos_std_m * noise.odom_pos_std_m * Mat3::Identity();
  s.P.block<3, 3>(kV, kV) = noise.odom_vel_std_mps * noise.odom_vel_std_mps * Mat3::Identity();
  s.P.block<3, 3>(kPhi, kPhi) = noise.odom_att_std_rad * noise.odom_att_std_rad * Mat3::Identity();
  s.P.block<3, 3>(kBa, kBa) = noise.accel_bias_init * noise.accel_bias_init * Mat3::Identity();
  s.P.block<3, 3>(kBg, kBg) = noise.gyro_bias_init * noise.gyro_bias_init * Mat3::Identity();
  s.P.block<3, 3>(kEw, kEw) = Mat3::Identity();

  const ProcessNoiseSpec q = ProcessNoiseSpec::from_densities(noise, 0.3);
  auto rng = make_rng(8, "airflow-noise");
  std::normal_distribution<double> n(0.0, 0.05);
  const Mat3 sigma_lstm = 0.05 * 0.05 * Mat3::Identity();
  double t10_err = -1.0;
  for (std::size_t k = 1; k < log.rows.size(); ++k) {
    const auto& prev = log.rows[k - 1];
    const auto& r = log.rows[k];
    REQUIRE(predict(s, prev.accel, prev.gyro, r.t - prev.t, q));
    if (k % 10 == 0) {
      OdomMeasurement m;
      m.p = r.odom_p;
      m.v = r.odom_v;
      m.R = r.odom_R;
      m.cov_p = noise.odom_pos_std_m * noise.odom_pos_std_m * Mat3::Identity();
      m.cov_v = noise.odom_vel_std_mps * noise.odom_vel_std_mps * Mat3::Identity();
      m.cov_att = noise.odom_att_std_rad * noise.odom_att_std_rad * Mat3::Identity();
      REQUIRE(update_odometry(s, m));
    }
    if (k % 8 == 0) {
      const Vec3 meas = r.gt_R.transpose() * (r.gt_wind - r.gt_v) +
                        Vec3(n(rng), n(rng), n(rng));
      REQUIRE(update_airflow(s, meas, sigma_lstm, nullptr));
    }
    if (t10_err < 0.0 && r.t >= 10.0) t10_err = (s.ew - Vec3(0, 2, 0)).norm();
  }
  CHECK(t10_err >= 0.0);
  CHECK(t10_err < 0.2);
  CHECK((s.ew - Vec3(0, 2, 0)).norm() < 0.2);
}

TEST_CASE("wind observability: odometry makes e_w converge, its absence does not") {
  sim::SensorNoiseSpec noise;
  const auto log = hover_log(20.0, 9, noise);
  FilterConfig cfg;
  cfg.mode = FilterMode::AioNoMap;
  cfg.noise = ProcessNoiseSpec::from_densities(noise, 0.3);
  const auto model = random_lstm(9);

  const auto with_odom = run_filter(log, cfg, &model, nullptr);
  const auto ew_var = [](const EstimateRow& r) {
    return r.cov_diag.segment<3>(kEw).sum();
  };
  CHECK(ew_var(with_odom.rows.back()) < 0.5 * ew_var(with_odom.rows.front()));

  const auto no_odom = run_filter(log, cfg, &model, nullptr, 0.0);
  CHECK(ew_var(no_odom.rows.back()) >= ew_var(no_odom.rows.front()));
}

TEST_CASE("imu-only dead reckoning on a noiseless hover log is exact") {
  sim::SensorNoiseSpec noise;
  noise.zero();
  const auto log = hover_log(20.0, 10, noise);
  FilterConfig cfg;
  cfg.mode = FilterMode::ImuOnly;
  // exact init from ground truth, then pure integration (odometry cut at 0)
  const auto run = run_filter(log, cfg, nullptr, nullptr, 0.0);
  CHECK(run.odom_updates == 0);
  CHECK((run.rows.back().p - log.rows.back().gt_p).norm() < 1e-6);
  CHECK((run.rows.back().v - log.rows.back().gt_v).norm() < 1e-6);
}

TEST_CASE("uninformative airflow updates reproduce the imu-only trajectory") {
  sim::SensorNoiseSpec noise;
  const auto log = hover_log(10.0, 11, noise);
  FilterConfig cfg;
  cfg.mode = FilterMode::ImuOnly;
  cfg.noise = ProcessNoiseSpec::from_densities(noise, 0.0);
  const auto base = run_filter(log, cfg, nullptr, nullptr, 5.0);

  auto model = random_lstm(11);
  model.sigma_lstm = 1e14 * Mat3::Identity();
  cfg.mode = FilterMode::AioNoMap;
  const auto aio = run_filter(log, cfg, &model, nullptr, 5.0);
  REQUIRE(aio.rows.size() == base.rows.size());
  for (std::size_t k = 0; k < base.rows.size(); ++k) {
    CHECK((aio.rows[k].p - base.rows[k].p).norm() < 1e-9);
    CHECK((aio.rows[k].v - base.rows[k].v).norm() < 1e-9);
    CHECK((aio.rows[k].R - base.rows[k].R).norm() < 1e-9);
  }
}

TEST_CASE("run_filter rejects missing artifacts and short logs") {
  sim::SensorNoiseSpec noise;
  const auto log = hover_log(1.0, 12, noise);
  FilterConfig cfg;
  cfg.mode = FilterMode::AioNoMap;
  CHECK_THROWS_AS(run_filter(log, cfg, nullptr, nullptr), FilterInputError);
  cfg.mode = FilterMode::AioWithMap;
  const auto model = random_lstm(12);
  CHECK_THROWS_AS(run_filter(log, cfg, &model, nullptr), FilterInputError);
  sim::SensorLog tiny;
  tiny.rows.resize(1);
  cfg.mode = FilterMode::ImuOnly;
  CHECK_THROWS_AS(run_filter(tiny, cfg, nullptr, nullptr), FilterInputError);
}

TEST_CASE("Monte-Carlo NEES of (p, v) stays in the 95% band") {
  sim::SensorNoiseSpec noise;
  const ProcessNoiseSpec q = ProcessNoiseSpec::from_densities(noise, 0.0);
  int inside = 0;
  for (int run = 0; run < 100; ++run) {
    const auto log = hover_log(10.0, 1000 + run, noise);
    FilterState s;
    s.p = log.rows.front().odom_p;
    s.v = log.rows.front().odom_v;
    s.R_ref = log.rows.front().odom_R;
    s.P.setZero();
    s.P.block<3, 3>(kP, kP) = noise.odom_pos_std_m * noise.odom_pos_std_m * Mat3::Identity();
    s.P.block<3, 3>(kV, kV) = noise.odom_vel_std_mps * noise.odom_vel_std_mps * Mat3::Identity();
    s.P.block<3, 3>(kPhi, kPhi) = noise.odom_att_std_rad * noise.odom_att_std_rad * Mat3::Identity();
    s.P.block<3, 3>(kBa, kBa) = noise.accel_bias_init * noise.accel_bias_init * Mat3::Identity();
    s.P.block<3, 3>(kBg, kBg) = noise.gyro_bias_init * noise.gyro_bias_init * Mat3::Identity();
    s.P.block<3, 3>(kEw, kEw) = Mat3::Identity();

    for (std::size_t k = 1; k < log.rows.size(); ++k) {
      const auto& prev = log.rows[k - 1];
      const auto& r = log.rows[k];
      REQUIRE(predict(s, prev.accel, prev.gyro, r.t - prev.t, q));
      if (k % 10 == 0) {
        OdomMeasurement m;
        m.p = r.odom_p;
        m.v = r.odom_v;
        m.R = r.odom_R;
        m.cov_p = noise.odom_pos_std_m * noise.odom_pos_std_m * Mat3::Identity();
        m.cov_v = noise.odom_vel_std_mps * noise.odom_vel_std_mps * Mat3::Identity();
        m.cov_att = noise.odom_att_std_rad * noise.odom_att_std_rad * Mat3::Identity();
        REQUIRE(update_odometry(s, m));
      }
    }
    Eigen::Matrix<double, 6, 1> e;
    e.segment<3>(0) = s.p - log.rows.back().gt_p;
    e.segment<3>(3) = s.v - log.rows.back().gt_v;
    const Eigen::Matrix<double, 6, 6> P6 = s.P.topLeftCorner<6, 6>();
    const double nees = e.dot(P6.ldlt().solve(e));
    if (nees > kChi6Lo && nees < kChi6Hi) ++inside;
  }
  CHECK(inside >= 90);
}
