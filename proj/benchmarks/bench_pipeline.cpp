// Microbenchmarks for the hot paths: EKF prediction, airflow updates, LSTM
// inference and wind-map queries.
#include <benchmark/benchmark.h>

#include "aio/airflow/lstm.hpp"
#include "aio/ekf/filter.hpp"
#include "aio/rng.hpp"
#include "aio/windmap/wind_map.hpp"

namespace {

using namespace aio;

ekf::FilterState make_state() {
  ekf::FilterState s;
  s.p = Vec3(0.5, -0.2, 1.4);
  s.v = Vec3(0.8, 0.1, 0.0);
  s.R_ref = exp_so3(Vec3(0.1, -0.2, 0.7));
  s.P = 0.01 * ekf::Mat18::Identity();
  return s;
}

void BM_EkfPredict(benchmark::State& state) {
  auto s = make_state();
  const Vec3 accel(0.1, -0.05, 9.8), gyro(0.01, 0.02, -0.4);
  ekf::ProcessNoiseSpec q;
  q.sigma_a = 4e-4 * Mat3::Identity();
  q.sigma_g = 4e-6 * Mat3::Identity();
  q.sigma_ba = 9e-6 * Mat3::Identity();
  q.sigma_bg = 9e-8 * Mat3::Identity();
  for (auto _ : state) {
    ekf::predict(s, accel, gyro, 0.005, q);
    benchmark::DoNotOptimize(s.P);
  }
}
BENCHMARK(BM_EkfPredict);

void BM_EkfAirflowUpdate(benchmark::State& state) {
  const Mat3 sigma = 0.01 * Mat3::Identity();
  for (auto _ : state) {
    auto s = make_state();
    ekf::update_airflow(s, Vec3(-0.7, 0.1, 0.05), sigma, nullptr);
    benchmark::DoNotOptimize(s.P);
  }
}
BENCHMARK(BM_EkfAirflowUpdate);

void BM_LstmForward(benchmark::State& state) {
  auto model = airflow::make_empty_regressor();
  auto rng = make_rng(7, "bench");
  std::normal_distribution<double> n(0.0, 0.2);
  Eigen::VectorXd theta(model.num_params());
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] = n(rng);
  model.set_params_flat(theta);
  airflow::Window w;
  for (int r = 0; r < airflow::kSeqLen; ++r)
    for (int c = 0; c < airflow::kInputDim; ++c) w(r, c) = n(rng);
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(w));
}
BENCHMARK(BM_LstmForward);

void BM_WindMapQuery(benchmark::State& state) {
  auto rng = make_rng(7, "bench-map");
  std::normal_distribution<double> n(0.0, 1.0);
  windmap::WindDataset data;
  const int K = 120;
  data.positions.resize(K, 3);
  data.wind.resize(K, 3);
  for (int i = 0; i < K; ++i) {
    data.positions.row(i) << n(rng), n(rng), 1.5 + 0.1 * n(rng);
    data.wind.row(i) << n(rng), n(rng), 0.1 * n(rng);
  }
  windmap::GpFitConfig cfg;
  cfg.optimize_hypers = false;
  const auto map = windmap::fit_sparse(data, {}, 20, cfg);
  const Vec3 p(0.3, -0.4, 1.5);
  for (auto _ : state) benchmark::DoNotOptimize(map.query(p));
}
BENCHMARK(BM_WindMapQuery);

}  // namespace

BENCHMARK_MAIN();
