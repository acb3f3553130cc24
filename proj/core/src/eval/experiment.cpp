#include "aio/eval/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>

#include <json.hpp>

#include "aio/rng.hpp"

namespace aio::eval {

void ExperimentSpec::validate(double log_duration_s) const {
  if (repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
  if (failure_start_s < 0.0 ||
      failure_start_s + failure_window_s > log_duration_s)
    throw std::invalid_argument("failure window must lie within the log");
  if (horizon_s <= failure_start_s)
    throw std::invalid_argument("horizon must extend past the failure window");
}

std::string mode_name(ekf::FilterMode mode) {
  switch (mode) {
    case ekf::FilterMode::ImuOnly: return "imu-only";
    case ekf::FilterMode::AioNoMap: return "aio-no-map";
    case ekf::FilterMode::AioWithMap: return "aio-with-map";
  }
  return "?";
}

namespace {

MetricSummary summarize(std::vector<double> v) {
  MetricSummary s;
  s.count = static_cast<int>(v.size());
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  auto quantile = [&](double q) {
    const double x = q * (v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(x);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (x - lo) * (v[hi] - v[lo]);
  };
  s.median = quantile(0.5);
  s.q1 = quantile(0.25);
  s.q3 = quantile(0.75);
  s.min = v.front();
  s.max = v.back();
  return s;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec,
                                const ExperimentArtifacts& artifacts) {
  ExperimentResult result;
  for (int rep = 0; rep < spec.repetitions; ++rep) {
    auto rng = make_rng(spec.seed, "experiment-failure", rep);
    std::uniform_real_distribution<double> unif(
        spec.failure_start_s, spec.failure_start_s + spec.failure_window_s);
    const double failure_t = unif(rng);
    const sim::SensorLog log = artifacts.make_log(rep);
    spec.validate(log.rows.back().t);

    for (const ekf::FilterMode mode : artifacts.modes) {
      RunRecord rec;
      rec.rep = rep;
      rec.mode = mode_name(mode);
      rec.failure_t = failure_t;
      try {
        ekf::FilterConfig cfg = artifacts.base_config;
        cfg.mode = mode;
        const ekf::FilterRun run =
            ekf::run_filter(log, cfg, artifacts.model, artifacts.map, failure_t);

        std::vector<Vec3> est_p, gt_p;
        std::vector<Mat3> est_R, gt_R;
        for (std::size_t k = 0; k < log.rows.size(); ++k) {
          const double t = log.rows[k].t;
          if (t < failure_t || t > spec.horizon_s) continue;
          est_p.push_back(run.rows[k].p);
          est_R.push_back(run.rows[k].R);
          gt_p.push_back(log.rows[k].gt_p);
          gt_R.push_back(log.rows[k].gt_R);
        }
        rec.metrics = compute_metrics(est_p, est_R, gt_p, gt_R, log.rate_hz);
        rec.ok = true;
      } catch (const std::exception& e) {
        rec.error = e.what();
      }
      result.records.push_back(rec);
    }
  }

  std::map<std::string, std::map<std::string, std::vector<double>>> grouped;
  for (const auto& rec : result.records) {
    if (!rec.ok) continue;
    auto& g = grouped[rec.mode];
    g["rmse"].push_back(rec.metrics.rmse_position_m);
    g["rmse_yaw"].push_back(rec.metrics.rmse_yaw_rad);
    if (rec.metrics.dr) g["dr"].push_back(*rec.metrics.dr);
    g["rte_2s"].push_back(rec.metrics.rte_2s_m);
  }
  for (const auto& [mode, metrics] : grouped)
    for (const auto& [name, values] : metrics)
      result.aggregates[mode][name] = summarize(values);
  return result;
}

void write_results_csv(const ExperimentResult& r, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << "# aio-results v1\n";
  f << "run,mode,failure_t,rmse,rmse_yaw,dr,rte_2s,ok\n";
  char buf[256];
  for (const auto& rec : r.records) {
    std::snprintf(buf, sizeof(buf), "%d,%s,%.12g,%.12g,%.12g,%.12g,%.12g,%d\n",
                  rec.rep, rec.mode.c_str(), rec.failure_t,
                  rec.metrics.rmse_position_m, rec.metrics.rmse_yaw_rad,
                  rec.metrics.dr.value_or(std::nan("")), rec.metrics.rte_2s_m,
                  rec.ok ? 1 : 0);
    f << buf;
  }
}

void write_aggregate_json(const ExperimentResult& r, const std::string& path) {
  nlohmann::json j;
  j["format_version"] = 1;
  for (const auto& [mode, metrics] : r.aggregates) {
    for (const auto& [name, s] : metrics) {
      j["aggregates"][mode][name] = {{"median", s.median}, {"q1", s.q1},
                                     {"q3", s.q3},         {"min", s.min},
                                     {"max", s.max},       {"count", s.count}};
    }
  }
  // grouped raw values for box-plot rendering
  for (const auto& rec : r.records) {
    if (!rec.ok) continue;
    j["values"][rec.mode]["rmse"].push_back(rec.metrics.rmse_position_m);
    j["values"][rec.mode]["rmse_yaw"].push_back(rec.metrics.rmse_yaw_rad);
    if (rec.metrics.dr) j["values"][rec.mode]["dr"].push_back(*rec.metrics.dr);
    j["values"][rec.mode]["rte_2s"].push_back(rec.metrics.rte_2s_m);
  }
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << j.dump(2) << '\n';
}

}  // namespace aio::eval
