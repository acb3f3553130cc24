#include "aio/cli/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "aio/airflow/train.hpp"
#include "aio/ekf/runner.hpp"
#include "aio/eval/experiment.hpp"
#include "aio/rng.hpp"
#include "aio/sim/sensors.hpp"

namespace aio::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string Paths::log_csv(const std::string& dataset) const {
  return out + "/logs/" + dataset + ".csv";
}
std::string Paths::model_json() const { return out + "/model.json"; }
std::string Paths::wind_estimates_csv() const {
  return out + "/wind_estimates.csv";
}
std::string Paths::map_json() const { return out + "/wind_map.json"; }
std::string Paths::map_grid_csv() const { return out + "/map_grid.csv"; }
std::string Paths::estimate_csv(const std::string& mode) const {
  return out + "/estimate_" + mode + ".csv";
}
std::string Paths::results_csv() const { return out + "/results.csv"; }
std::string Paths::aggregate_json() const { return out + "/aggregate.json"; }
std::string Paths::manifest_json(const std::string& stage) const {
  return out + "/" + stage + ".manifest.json";
}

namespace {

void ensure_parent(const std::string& path) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

void write_manifest(const io::PipelineConfig& cfg, const Paths& paths,
                    const std::string& stage,
                    const std::vector<std::string>& outputs,
                    json extra = json::object()) {
  json m;
  m["stage"] = stage;
  m["format_version"] = 1;
  m["seed"] = cfg.seed;
  m["outputs"] = outputs;
  m["config"] = json::parse(io::pipeline_config_to_json(cfg));
  for (auto& [k, v] : extra.items()) m[k] = v;
  const std::string path = paths.manifest_json(stage);
  ensure_parent(path);
  std::ofstream f(path);
  if (!f) throw PipelineError("cannot write " + path);
  f << m.dump(2) << "\n";
}

sim::SensorLog load_log(const Paths& paths, const std::string& dataset) {
  const std::string path = paths.log_csv(dataset);
  if (!fs::exists(path))
    throw PipelineError("missing sensor log '" + path +
                        "' (run the simulate stage first)");
  return sim::read_sensor_log_csv(path);
}

airflow::LstmRegressor load_model(const Paths& paths) {
  if (!fs::exists(paths.model_json()))
    throw PipelineError("missing model '" + paths.model_json() +
                        "' (run the train-airflow stage first)");
  return airflow::LstmRegressor::load(paths.model_json());
}

windmap::WindMap load_map(const Paths& paths) {
  if (!fs::exists(paths.map_json()))
    throw PipelineError("missing wind map '" + paths.map_json() +
                        "' (run the fit-map stage first)");
  return windmap::WindMap::load(paths.map_json());
}

sim::SensorLog simulate_dataset(const io::PipelineConfig& cfg,
                                const io::DatasetSpec& d, std::uint64_t seed) {
  const auto truth = sim::generate_trajectory(d.trajectory);
  const double failure = d.failure_time_s < 0.0
                             ? d.trajectory.duration_s + 1.0
                             : d.failure_time_s;
  return sim::synthesize_sensors(truth, d.wind, cfg.noise, cfg.whisker,
                                 failure, seed, cfg.throttle);
}

}  // namespace

void write_wind_estimates_csv(const std::vector<WindEstimateRow>& rows,
                              double sample_hz, const std::string& path) {
  ensure_parent(path);
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw PipelineError("cannot write " + path);
  std::fprintf(f, "# aio-wind-estimates v1 sample_hz=%.12g\n", sample_hz);
  std::fprintf(f, "t,px,py,pz,wx,wy,wz\n");
  for (const auto& r : rows)
    std::fprintf(f, "%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n", r.t,
                 r.p.x(), r.p.y(), r.p.z(), r.w.x(), r.w.y(), r.w.z());
  std::fclose(f);
}

std::vector<WindEstimateRow> read_wind_estimates_csv(const std::string& path,
                                                     double* sample_hz) {
  std::ifstream f(path);
  if (!f) throw PipelineError("cannot read " + path);
  std::string line;
  if (!std::getline(f, line) || line.rfind("# aio-wind-estimates v1", 0) != 0)
    throw PipelineError(path + " is not a wind-estimate table");
  if (sample_hz) {
    *sample_hz = 1.0;
    auto pos = line.find("sample_hz=");
    if (pos != std::string::npos)
      *sample_hz = std::stod(line.substr(pos + 10));
  }
  std::getline(f, line);  // header row
  std::vector<WindEstimateRow> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    WindEstimateRow r;
    double vals[7];
    std::stringstream ss(line);
    std::string cell;
    for (int i = 0; i < 7; ++i) {
      if (!std::getline(ss, cell, ','))
        throw PipelineError(path + ": short row");
      vals[i] = std::stod(cell);
    }
    r.t = vals[0];
    r.p = Vec3(vals[1], vals[2], vals[3]);
    r.w = Vec3(vals[4], vals[5], vals[6]);
    rows.push_back(r);
  }
  return rows;
}

void cmd_simulate(const io::PipelineConfig& cfg, const Paths& paths) {
  if (cfg.datasets.empty())
    throw io::ConfigError("config declares no datasets to simulate");
  std::vector<std::string> outputs;
  for (const auto& d : cfg.datasets) {
    const auto log =
        simulate_dataset(cfg, d, derive_seed(cfg.seed, "sim-" + d.name));
    const std::string path = paths.log_csv(d.name);
    ensure_parent(path);
    sim::write_sensor_log_csv(log, path);
    outputs.push_back(path);
  }
  write_manifest(cfg, paths, "simulate", outputs);
}

void cmd_train_airflow(const io::PipelineConfig& cfg, const Paths& paths) {
  if (cfg.training_datasets.empty())
    throw io::ConfigError("config declares no training datasets");
  std::vector<sim::SensorLog> logs;
  for (const auto& name : cfg.training_datasets)
    logs.push_back(load_log(paths, name));
  auto cnf = cfg.training;
  auto result = airflow::lstm_train(logs, cnf);
  ensure_parent(paths.model_json());
  result.model.save(paths.model_json());
  json extra;
  extra["train_mse"] = result.train_mse;
  extra["val_mse"] = result.val_mse;
  extra["diverged"] = result.diverged;
  write_manifest(cfg, paths, "train-airflow", {paths.model_json()}, extra);
}

void cmd_estimate_wind(const io::PipelineConfig& cfg, const Paths& paths) {
  if (cfg.mapping_dataset.empty())
    throw io::ConfigError("config declares no mapping dataset");
  const auto log = load_log(paths, cfg.mapping_dataset);
  for (const auto& row : log.rows)
    if (!row.odom_available)
      throw std::invalid_argument(
          "mapping requires odometry through the whole log; '" +
          cfg.mapping_dataset + "' has gaps");
  const auto model = load_model(paths);
  auto fc = cfg.make_filter_config(ekf::FilterMode::AioNoMap);
  // Mapping wants a responsive wind state; dead reckoning wants a stiff one.
  fc.noise.sigma_w = cfg.map_wind_rw_density * cfg.map_wind_rw_density *
                     Mat3::Identity();
  const auto run = ekf::run_filter(log, fc, &model, nullptr);

  // Subsample the smoothed wind states after the burn-in. With no map
  // attached, the filter's wind error state is the wind estimate itself.
  const auto stride = static_cast<std::size_t>(
      std::max(1.0, std::round(log.rate_hz / cfg.wind_sample_hz)));
  const auto first = static_cast<std::size_t>(
      std::lround(cfg.wind_burn_in_s * log.rate_hz));
  std::vector<WindEstimateRow> rows;
  for (std::size_t i = first; i < run.rows.size(); i += stride) {
    const auto& e = run.rows[i];
    rows.push_back({e.t, e.p, e.ew});
  }
  if (rows.empty())
    throw PipelineError("mapping log shorter than the configured burn-in");
  write_wind_estimates_csv(rows, cfg.wind_sample_hz,
                           paths.wind_estimates_csv());
  json extra;
  extra["rows"] = rows.size();
  extra["airflow_updates"] = run.airflow_updates;
  write_manifest(cfg, paths, "estimate-wind", {paths.wind_estimates_csv()},
                 extra);
}

void cmd_fit_map(const io::PipelineConfig& cfg, const Paths& paths) {
  if (!fs::exists(paths.wind_estimates_csv()))
    throw PipelineError("missing wind estimates '" +
                        paths.wind_estimates_csv() +
                        "' (run the estimate-wind stage first)");
  double sample_hz = cfg.wind_sample_hz;
  const auto rows = read_wind_estimates_csv(paths.wind_estimates_csv(),
                                            &sample_hz);
  windmap::WindDataset data;
  data.positions.resize(static_cast<Eigen::Index>(rows.size()), 3);
  data.wind.resize(static_cast<Eigen::Index>(rows.size()), 3);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    data.positions.row(static_cast<Eigen::Index>(i)) = rows[i].p.transpose();
    data.wind.row(static_cast<Eigen::Index>(i)) = rows[i].w.transpose();
  }
  data.subsample_hz = sample_hz;
  data.validate();

  const int M = std::min<int>(cfg.inducing_points,
                              static_cast<int>(data.size()));
  const auto map = cfg.map_exact
                       ? windmap::fit_exact(data, cfg.kernel, cfg.gp)
                       : windmap::fit_sparse(data, cfg.kernel, M, cfg.gp);
  ensure_parent(paths.map_json());
  map.save(paths.map_json());

  // Horizontal slice of the posterior for plotting.
  const Vec3 lo = data.positions.colwise().minCoeff().transpose();
  const Vec3 hi = data.positions.colwise().maxCoeff().transpose();
  const double z = 0.5 * (lo.z() + hi.z());
  std::FILE* f = std::fopen(paths.map_grid_csv().c_str(), "w");
  if (!f) throw PipelineError("cannot write " + paths.map_grid_csv());
  std::fprintf(f, "# aio-map-grid v1\n");
  std::fprintf(f, "x,y,z,mx,my,mz,vx,vy,vz\n");
  const int n = 21;
  for (int iy = 0; iy < n; ++iy) {
    for (int ix = 0; ix < n; ++ix) {
      Vec3 p(lo.x() - 0.5 + (hi.x() - lo.x() + 1.0) * ix / (n - 1),
             lo.y() - 0.5 + (hi.y() - lo.y() + 1.0) * iy / (n - 1), z);
      const auto q = map.query(p);
      std::fprintf(f, "%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n",
                   p.x(), p.y(), p.z(), q.mean.x(), q.mean.y(), q.mean.z(),
                   q.var.x(), q.var.y(), q.var.z());
    }
  }
  std::fclose(f);

  json extra;
  extra["inducing_points"] = M;
  extra["exact"] = cfg.map_exact;
  extra["training_points"] = data.size();
  extra["jitter_added"] = map.jitter_added();
  extra["final_objective"] = map.axes()[0].objective_history.empty()
                                 ? 0.0
                                 : map.axes()[0].objective_history.back();
  write_manifest(cfg, paths, "fit-map",
                 {paths.map_json(), paths.map_grid_csv()}, extra);
}

void cmd_run_filter(const io::PipelineConfig& cfg, const Paths& paths) {
  if (cfg.eval_dataset.empty())
    throw io::ConfigError("config declares no eval dataset");
  const auto log = load_log(paths, cfg.eval_dataset);

  airflow::LstmRegressor model;
  windmap::WindMap map;
  const airflow::LstmRegressor* model_p = nullptr;
  const windmap::WindMap* map_p = nullptr;
  if (cfg.run_mode != ekf::FilterMode::ImuOnly) {
    model = load_model(paths);
    model_p = &model;
  }
  if (cfg.run_mode == ekf::FilterMode::AioWithMap) {
    map = load_map(paths);
    map_p = &map;
  }
  const auto fc = cfg.make_filter_config(cfg.run_mode);
  const auto run = ekf::run_filter(log, fc, model_p, map_p);
  const std::string path = paths.estimate_csv(eval::mode_name(cfg.run_mode));
  ensure_parent(path);
  ekf::write_estimate_csv(run, path);
  json extra;
  extra["mode"] = eval::mode_name(cfg.run_mode);
  extra["airflow_updates"] = run.airflow_updates;
  extra["odom_updates"] = run.odom_updates;
  extra["predict_rejections"] = run.predict_rejections;
  write_manifest(cfg, paths, "run-filter", {path}, extra);
}

void cmd_evaluate(const io::PipelineConfig& cfg, const Paths& paths) {
  if (cfg.eval_dataset.empty())
    throw io::ConfigError("config declares no eval dataset");
  const auto& d = cfg.dataset(cfg.eval_dataset);
  cfg.experiment.validate(d.trajectory.duration_s);

  airflow::LstmRegressor model;
  windmap::WindMap map;
  eval::ExperimentArtifacts art;
  art.modes = cfg.eval_modes;
  art.base_config = cfg.make_filter_config(ekf::FilterMode::ImuOnly);
  const bool needs_model =
      std::any_of(art.modes.begin(), art.modes.end(),
                  [](ekf::FilterMode m) { return m != ekf::FilterMode::ImuOnly; });
  const bool needs_map =
      std::any_of(art.modes.begin(), art.modes.end(), [](ekf::FilterMode m) {
        return m == ekf::FilterMode::AioWithMap;
      });
  if (needs_model) {
    model = load_model(paths);
    art.model = &model;
  }
  if (needs_map) {
    map = load_map(paths);
    art.map = &map;
  }
  art.make_log = [&cfg, &d](int rep) {
    io::DatasetSpec fresh = d;
    fresh.failure_time_s = -1.0;  // the experiment injects its own failure
    return simulate_dataset(cfg, fresh, derive_seed(cfg.seed, "eval-log",
                                                    static_cast<std::uint64_t>(rep)));
  };

  const auto result = eval::run_experiment(cfg.experiment, art);
  ensure_parent(paths.results_csv());
  eval::write_results_csv(result, paths.results_csv());
  eval::write_aggregate_json(result, paths.aggregate_json());

  long failed = 0;
  for (const auto& rec : result.records)
    if (!rec.ok) ++failed;
  json extra;
  extra["runs"] = result.records.size();
  extra["failed_runs"] = failed;
  write_manifest(cfg, paths, "evaluate",
                 {paths.results_csv(), paths.aggregate_json()}, extra);
  if (failed > 0) throw PipelineError("evaluation had failed filter runs");
}

std::vector<std::string> pipeline_stage_names() {
  return {"simulate", "train-airflow", "estimate-wind",
          "fit-map",  "run-filter",    "evaluate"};
}

void run_pipeline(const io::PipelineConfig& cfg, const Paths& paths,
                  const std::vector<std::string>& stages) {
  std::vector<std::string> plan = stages;
  if (plan.empty()) {
    plan.push_back("simulate");
    if (!cfg.training_datasets.empty()) plan.push_back("train-airflow");
    if (!cfg.training_datasets.empty() && !cfg.mapping_dataset.empty()) {
      plan.push_back("estimate-wind");
      plan.push_back("fit-map");
    }
    if (!cfg.eval_dataset.empty()) {
      plan.push_back("run-filter");
      plan.push_back("evaluate");
    }
  }
  const auto known = pipeline_stage_names();
  for (const auto& s : plan)
    if (std::find(known.begin(), known.end(), s) == known.end())
      throw io::ConfigError("unknown pipeline stage: " + s);
  for (const auto& s : plan) {
    if (s == "simulate") cmd_simulate(cfg, paths);
    else if (s == "train-airflow") cmd_train_airflow(cfg, paths);
    else if (s == "estimate-wind") cmd_estimate_wind(cfg, paths);
    else if (s == "fit-map") cmd_fit_map(cfg, paths);
    else if (s == "run-filter") cmd_run_filter(cfg, paths);
    else if (s == "evaluate") cmd_evaluate(cfg, paths);
  }
}

}  // namespace aio::cli
