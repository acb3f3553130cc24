#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "aio/eval/experiment.hpp"
#include "aio/eval/metrics.hpp"
#include "aio/rng.hpp"

using namespace aio;
using eval::drift;
using eval::rmse;
using eval::rte;
using eval::yaw_rmse;

namespace {
std::vector<Vec3> zeros(std::size_t n) { return std::vector<Vec3>(n, Vec3::Zero()); }
}  // namespace

TEST_CASE("rmse hand cases") {
  std::vector<Vec3> gt = {Vec3(0.3, 1, 2), Vec3(4, 5, 6)};
  CHECK(rmse(gt, gt) == 0.0);

  std::vector<Vec3> off = gt;
  for (auto& p : off) p += Vec3(1, 0, 0);
  CHECK(rmse(off, gt) == doctest::Approx(1.0).epsilon(1e-12));

  std::vector<Vec3> est = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 2, 0)};
  CHECK(rmse(est, zeros(3)) == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-12));

  CHECK_THROWS(rmse({}, {}));
}

TEST_CASE("yaw rmse hand cases") {
  std::vector<Mat3> gt = {rot_z(0.1), rot_z(-2.0), rot_z(3.0)};
  CHECK(yaw_rmse(gt, gt) == 0.0);

  const double ten_deg = 10.0 * M_PI / 180.0;
  std::vector<Mat3> est;
  for (const auto& R : gt) est.push_back(rot_z(ten_deg) * R);
  CHECK(yaw_rmse(est, gt) == doctest::Approx(ten_deg).epsilon(1e-12));

  // +179 and -179 vs 0: wraps to 179 deg, not 181
  const double d179 = 179.0 * M_PI / 180.0;
  std::vector<Mat3> gt0 = {rot_z(0.0), rot_z(0.0)};
  std::vector<Mat3> est179 = {rot_z(d179), rot_z(-d179)};
  CHECK(yaw_rmse(est179, gt0) == doctest::Approx(d179).epsilon(1e-12));
}

TEST_CASE("yaw rmse excludes gimbal lock samples") {
  // pitch at pi/2: yaw undefined; the sample must not pollute the metric
  const Mat3 lock = exp_so3(Vec3(0, M_PI / 2, 0));
  std::vector<Mat3> gt = {rot_z(0.2), lock};
  std::vector<Mat3> est = {rot_z(0.2), rot_z(1.0) * lock};
  CHECK(yaw_rmse(est, gt) == doctest::Approx(0.0));
}

TEST_CASE("drift hand cases") {
  std::vector<Vec3> line;
  for (int i = 0; i <= 10; ++i) line.push_back(Vec3(i, 0, 0));
  CHECK(drift(line, line).value() == 0.0);

  auto est = line;
  est.back() += Vec3(0, 1, 0);
  CHECK(drift(est, line).value() == doctest::Approx(0.1).epsilon(1e-12));

  // square path, 4 x 1 m, final error 0.5 -> 0.125
  std::vector<Vec3> square = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 1, 0),
                              Vec3(0, 1, 0), Vec3(0, 0, 0)};
  auto sq_est = square;
  sq_est.back() += Vec3(0.5, 0, 0);
  CHECK(drift(sq_est, square).value() == doctest::Approx(0.125).epsilon(1e-12));

  // zero path length -> undefined
  CHECK(!drift(zeros(5), zeros(5)).has_value());
}

TEST_CASE("rte hand cases") {
  std::vector<Vec3> gt;
  std::vector<Mat3> gtR;
  for (int i = 0; i < 20; ++i) {
    gt.push_back(Vec3(0.3 * i, std::sin(0.2 * i), 0.0));
    gtR.push_back(rot_z(0.1 * i));
  }
  CHECK(rte(gt, gtR, gt, gtR, 4) == 0.0);

  // estimate rotated rigidly about origin by constant yaw with matching yaw
  // estimates -> compensation is exact
  const Mat3 Rpsi = rot_z(0.8);
  std::vector<Vec3> est;
  std::vector<Mat3> estR;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    est.push_back(Rpsi * gt[i]);
    estR.push_back(Rpsi * gtR[i]);
  }
  CHECK(rte(est, estR, gt, gtR, 4) < 1e-12);

  // single-window hand case: gt displacement [1,0,0] with yaw 0, estimated
  // displacement [0,1,0] with yaw 90 deg -> rotating the estimated
  // displacement back by the yaw difference cancels the residual
  std::vector<Vec3> g2 = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
  std::vector<Mat3> g2R = {rot_z(0.0), rot_z(0.0)};
  std::vector<Vec3> e2 = {Vec3(0, 0, 0), Vec3(0, 1, 0)};
  std::vector<Mat3> e2R = {rot_z(M_PI / 2), rot_z(M_PI / 2)};
  CHECK(rte(e2, e2R, g2, g2R, 1) < 1e-12);
}

TEST_CASE("metrics scale linearly with uniform error scaling") {
  auto rng = make_rng(3, "metric-scale");
  std::normal_distribution<double> n;
  std::vector<Vec3> gt, est1, est3;
  std::vector<Mat3> R;
  for (int i = 0; i < 50; ++i) {
    gt.push_back(Vec3(0.1 * i, n(rng), n(rng)));
    const Vec3 e(n(rng), n(rng), n(rng));
    est1.push_back(gt.back() + 0.01 * e);
    est3.push_back(gt.back() + 0.03 * e);
    R.push_back(rot_z(0.05 * i));
  }
  CHECK(rmse(est3, gt) == doctest::Approx(3.0 * rmse(est1, gt)).epsilon(1e-9));
  CHECK(rte(est3, R, gt, R, 5) ==
        doctest::Approx(3.0 * rte(est1, R, gt, R, 5)).epsilon(1e-9));
}

TEST_CASE("metrics ignore wall-clock labels") {
  // compute_metrics consumes samples; the window is fixed in samples, so a
  // uniform re-indexing of time changes nothing
  std::vector<Vec3> gt, est;
  std::vector<Mat3> R;
  for (int i = 0; i < 100; ++i) {
    gt.push_back(Vec3(0.05 * i, 0, 0));
    est.push_back(gt.back() + Vec3(0.01, -0.02, 0));
    R.push_back(rot_z(0.01 * i));
  }
  const auto a = eval::compute_metrics(est, R, gt, R, 10.0, 2.0);
  const auto b = eval::compute_metrics(est, R, gt, R, 10.0, 2.0);
  CHECK(a.rmse_position_m == b.rmse_position_m);
  CHECK(a.rte_2s_m == b.rte_2s_m);
  CHECK(a.rmse_position_m >= 0.0);
  CHECK(std::isfinite(a.rte_2s_m));
}

TEST_CASE("experiment spec validation") {
  eval::ExperimentSpec spec;
  CHECK_NOTHROW(spec.validate(30.0));
  spec.repetitions = 0;
  CHECK_THROWS(spec.validate(30.0));
  spec.repetitions = 1;
  spec.failure_start_s = 29.5;  // window would leave the log
  CHECK_THROWS(spec.validate(30.0));
}

TEST_CASE("quartile aggregation") {
  // run_experiment's summary statistics, probed through the public writer by
  // a tiny synthetic: handled in test_pipeline; here check mode names only
  CHECK(eval::mode_name(ekf::FilterMode::ImuOnly) == "imu-only");
  CHECK(eval::mode_name(ekf::FilterMode::AioNoMap) == "aio-no-map");
  CHECK(eval::mode_name(ekf::FilterMode::AioWithMap) == "aio-with-map");
}
