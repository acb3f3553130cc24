#include "aio/io/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "aio/rng.hpp"

namespace aio::io {

using nlohmann::json;

namespace {

Vec3 vec3_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("expected a 3-vector");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

json vec3_to(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

sim::Figure figure_from(const std::string& s) {
  if (s == "hover") return sim::Figure::Hover;
  if (s == "circle") return sim::Figure::Circle;
  if (s == "lissajous") return sim::Figure::Lissajous;
  if (s == "waypoints") return sim::Figure::Waypoints;
  throw ConfigError("unknown trajectory figure: " + s);
}

std::string figure_to(sim::Figure f) {
  switch (f) {
    case sim::Figure::Hover: return "hover";
    case sim::Figure::Circle: return "circle";
    case sim::Figure::Lissajous: return "lissajous";
    case sim::Figure::Waypoints: return "waypoints";
  }
  return "circle";
}

sim::YawProfile yaw_from(const std::string& s) {
  if (s == "fixed") return sim::YawProfile::Fixed;
  if (s == "tracking") return sim::YawProfile::Tracking;
  if (s == "sinusoid") return sim::YawProfile::Sinusoid;
  throw ConfigError("unknown yaw profile: " + s);
}

std::string yaw_to(sim::YawProfile y) {
  switch (y) {
    case sim::YawProfile::Fixed: return "fixed";
    case sim::YawProfile::Tracking: return "tracking";
    case sim::YawProfile::Sinusoid: return "sinusoid";
  }
  return "fixed";
}

sim::TrajectorySpec trajectory_from(const json& j) {
  sim::TrajectorySpec s;
  s.duration_s = j.value("duration_s", s.duration_s);
  s.rate_hz = j.value("rate_hz", s.rate_hz);
  if (j.contains("figure")) s.figure = figure_from(j.at("figure"));
  if (j.contains("center")) s.center = vec3_from(j.at("center"));
  s.radius_m = j.value("radius_m", s.radius_m);
  if (j.contains("lissajous_amp")) s.lissajous_amp = vec3_from(j.at("lissajous_amp"));
  if (j.contains("lissajous_freq")) s.lissajous_freq = vec3_from(j.at("lissajous_freq"));
  if (j.contains("waypoints")) {
    for (const auto& w : j.at("waypoints")) s.waypoints.push_back(vec3_from(w));
  }
  if (j.contains("waypoint_times"))
    s.waypoint_times = j.at("waypoint_times").get<std::vector<double>>();
  s.peak_speed_mps = j.value("peak_speed_mps", s.peak_speed_mps);
  if (j.contains("yaw")) s.yaw = yaw_from(j.at("yaw"));
  s.yaw0_rad = j.value("yaw0_rad", s.yaw0_rad);
  s.yaw_amp_rad = j.value("yaw_amp_rad", s.yaw_amp_rad);
  s.yaw_freq_hz = j.value("yaw_freq_hz", s.yaw_freq_hz);
  return s;
}

json trajectory_to(const sim::TrajectorySpec& s) {
  json j;
  j["duration_s"] = s.duration_s;
  j["rate_hz"] = s.rate_hz;
  j["figure"] = figure_to(s.figure);
  j["center"] = vec3_to(s.center);
  j["radius_m"] = s.radius_m;
  j["lissajous_amp"] = vec3_to(s.lissajous_amp);
  j["lissajous_freq"] = vec3_to(s.lissajous_freq);
  if (!s.waypoints.empty()) {
    json ws = json::array();
    for (const auto& w : s.waypoints) ws.push_back(vec3_to(w));
    j["waypoints"] = ws;
    j["waypoint_times"] = s.waypoint_times;
  }
  j["peak_speed_mps"] = s.peak_speed_mps;
  j["yaw"] = yaw_to(s.yaw);
  j["yaw0_rad"] = s.yaw0_rad;
  j["yaw_amp_rad"] = s.yaw_amp_rad;
  j["yaw_freq_hz"] = s.yaw_freq_hz;
  return j;
}

sim::WindFieldSpec wind_from(const json& j) {
  sim::WindFieldSpec s;
  if (j.contains("jets")) {
    for (const auto& je : j.at("jets")) {
      sim::JetSpec jet;
      if (je.contains("origin")) jet.origin = vec3_from(je.at("origin"));
      if (je.contains("direction"))
        jet.direction = vec3_from(je.at("direction")).normalized();
      jet.core_speed_mps = je.value("core_speed_mps", jet.core_speed_mps);
      jet.radial_decay_m = je.value("radial_decay_m", jet.radial_decay_m);
      jet.axial_decay_m = je.value("axial_decay_m", jet.axial_decay_m);
      s.jets.push_back(jet);
    }
  }
  s.turbulence_std_mps = j.value("turbulence_std_mps", s.turbulence_std_mps);
  s.turbulence_corr_time_s =
      j.value("turbulence_corr_time_s", s.turbulence_corr_time_s);
  return s;
}

json wind_to(const sim::WindFieldSpec& s) {
  json j;
  json jets = json::array();
  for (const auto& jet : s.jets) {
    json je;
    je["origin"] = vec3_to(jet.origin);
    je["direction"] = vec3_to(jet.direction);
    je["core_speed_mps"] = jet.core_speed_mps;
    je["radial_decay_m"] = jet.radial_decay_m;
    je["axial_decay_m"] = jet.axial_decay_m;
    jets.push_back(je);
  }
  j["jets"] = jets;
  j["turbulence_std_mps"] = s.turbulence_std_mps;
  j["turbulence_corr_time_s"] = s.turbulence_corr_time_s;
  return j;
}

void noise_from(const json& j, sim::SensorNoiseSpec& n) {
  n.accel_noise_density = j.value("accel_noise_density", n.accel_noise_density);
  n.gyro_noise_density = j.value("gyro_noise_density", n.gyro_noise_density);
  n.accel_bias_rw_density =
      j.value("accel_bias_rw_density", n.accel_bias_rw_density);
  n.gyro_bias_rw_density =
      j.value("gyro_bias_rw_density", n.gyro_bias_rw_density);
  n.accel_bias_init = j.value("accel_bias_init", n.accel_bias_init);
  n.gyro_bias_init = j.value("gyro_bias_init", n.gyro_bias_init);
  n.whisker_noise_std_rad =
      j.value("whisker_noise_std_rad", n.whisker_noise_std_rad);
  n.odom_pos_std_m = j.value("odom_pos_std_m", n.odom_pos_std_m);
  n.odom_vel_std_mps = j.value("odom_vel_std_mps", n.odom_vel_std_mps);
  n.odom_att_std_rad = j.value("odom_att_std_rad", n.odom_att_std_rad);
}

json noise_to(const sim::SensorNoiseSpec& n) {
  json j;
  j["accel_noise_density"] = n.accel_noise_density;
  j["gyro_noise_density"] = n.gyro_noise_density;
  j["accel_bias_rw_density"] = n.accel_bias_rw_density;
  j["gyro_bias_rw_density"] = n.gyro_bias_rw_density;
  j["accel_bias_init"] = n.accel_bias_init;
  j["gyro_bias_init"] = n.gyro_bias_init;
  j["whisker_noise_std_rad"] = n.whisker_noise_std_rad;
  j["odom_pos_std_m"] = n.odom_pos_std_m;
  j["odom_vel_std_mps"] = n.odom_vel_std_mps;
  j["odom_att_std_rad"] = n.odom_att_std_rad;
  return j;
}

void training_from(const json& j, airflow::TrainingConfig& c) {
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.validation_split = j.value("validation_split", c.validation_split);
  c.use_airflow = j.value("use_airflow", c.use_airflow);
  c.use_gyro = j.value("use_gyro", c.use_gyro);
  c.use_accel = j.value("use_accel", c.use_accel);
  c.use_throttle = j.value("use_throttle", c.use_throttle);
}

json training_to(const airflow::TrainingConfig& c) {
  json j;
  j["learning_rate"] = c.learning_rate;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["validation_split"] = c.validation_split;
  j["use_airflow"] = c.use_airflow;
  j["use_gyro"] = c.use_gyro;
  j["use_accel"] = c.use_accel;
  j["use_throttle"] = c.use_throttle;
  return j;
}

}  // namespace

ekf::FilterMode mode_from_string(const std::string& s) {
  if (s == "imu-only") return ekf::FilterMode::ImuOnly;
  if (s == "aio-no-map") return ekf::FilterMode::AioNoMap;
  if (s == "aio-with-map") return ekf::FilterMode::AioWithMap;
  throw ConfigError("unknown filter mode: " + s);
}

const DatasetSpec& PipelineConfig::dataset(const std::string& name) const {
  for (const auto& d : datasets)
    if (d.name == name) return d;
  throw ConfigError("no dataset named '" + name + "' in the config");
}

ekf::FilterConfig PipelineConfig::make_filter_config(ekf::FilterMode mode) const {
  ekf::FilterConfig fc;
  fc.mode = mode;
  fc.noise = ekf::ProcessNoiseSpec::from_densities(noise, wind_rw_density);
  fc.odom_cov_p = noise.odom_pos_std_m * noise.odom_pos_std_m * Mat3::Identity();
  fc.odom_cov_v =
      noise.odom_vel_std_mps * noise.odom_vel_std_mps * Mat3::Identity();
  fc.odom_cov_att =
      noise.odom_att_std_rad * noise.odom_att_std_rad * Mat3::Identity();
  fc.use_odom_v = use_odom_v;
  fc.use_odom_att = use_odom_att;
  fc.odom_every = odom_every;
  return fc;
}

PipelineConfig parse_pipeline_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    PipelineConfig c;
    if (!j.contains("seed"))
      throw ConfigError("config requires a root 'seed' for reproducibility");
    c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("noise")) noise_from(j.at("noise"), c.noise);
    if (j.contains("whisker")) {
      const json& w = j.at("whisker");
      c.whisker.propwash_gain = w.value("propwash_gain", c.whisker.propwash_gain);
      c.whisker.theta_max_rad = w.value("theta_max_rad", c.whisker.theta_max_rad);
      c.whisker.half_speed_mps =
          w.value("half_speed_mps", c.whisker.half_speed_mps);
      if (w.contains("mounts")) {
        const json& ms = w.at("mounts");
        if (!ms.is_array() || ms.size() != 4)
          throw ConfigError("whisker.mounts must list 4 rotation vectors");
        for (int i = 0; i < 4; ++i)
          c.whisker.mounts[static_cast<std::size_t>(i)] = exp_so3(vec3_from(ms[i]));
      }
    }
    if (j.contains("throttle")) {
      const json& t = j.at("throttle");
      c.throttle.hover = t.value("hover", c.throttle.hover);
      c.throttle.gain_per_mps2 = t.value("gain_per_mps2", c.throttle.gain_per_mps2);
    }
    if (j.contains("datasets")) {
      for (const auto& dj : j.at("datasets")) {
        DatasetSpec d;
        d.name = dj.at("name").get<std::string>();
        if (d.name.empty() ||
            d.name.find_first_not_of(
                "abcdefghijklmnopqrstuvwxyz"
                "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-") != std::string::npos)
          throw ConfigError("dataset name '" + d.name +
                            "' must be a non-empty [A-Za-z0-9_-]+ token");
        if (dj.contains("trajectory")) d.trajectory = trajectory_from(dj.at("trajectory"));
        if (dj.contains("wind")) d.wind = wind_from(dj.at("wind"));
        d.failure_time_s = dj.value("failure_time_s", d.failure_time_s);
        c.datasets.push_back(std::move(d));
      }
    }
    if (j.contains("training_datasets"))
      c.training_datasets = j.at("training_datasets").get<std::vector<std::string>>();
    c.mapping_dataset = j.value("mapping_dataset", c.mapping_dataset);
    c.eval_dataset = j.value("eval_dataset", c.eval_dataset);
    if (j.contains("training")) training_from(j.at("training"), c.training);

    if (j.contains("map")) {
      const json& m = j.at("map");
      c.kernel.signal_var = m.value("signal_var", c.kernel.signal_var);
      c.kernel.length_scale = m.value("length_scale", c.kernel.length_scale);
      c.kernel.noise_var = m.value("noise_var", c.kernel.noise_var);
      c.inducing_points = m.value("inducing_points", c.inducing_points);
      c.map_exact = m.value("exact", c.map_exact);
      c.gp.optimize_hypers = m.value("optimize_hypers", c.gp.optimize_hypers);
      c.gp.max_iters = m.value("max_iters", c.gp.max_iters);
      c.gp.min_noise_var = m.value("min_noise_var", c.gp.min_noise_var);
      c.wind_burn_in_s = m.value("burn_in_s", c.wind_burn_in_s);
      c.map_wind_rw_density =
          m.value("wind_rw_density", c.map_wind_rw_density);
      c.wind_sample_hz = m.value("sample_hz", c.wind_sample_hz);
    }

    if (j.contains("filter")) {
      const json& f = j.at("filter");
      c.wind_rw_density = f.value("wind_rw_density", c.wind_rw_density);
      c.odom_every = f.value("odom_every", c.odom_every);
      c.use_odom_v = f.value("use_odom_v", c.use_odom_v);
      c.use_odom_att = f.value("use_odom_att", c.use_odom_att);
      if (f.contains("mode")) c.run_mode = mode_from_string(f.at("mode"));
    }

    if (j.contains("experiment")) {
      const json& e = j.at("experiment");
      c.experiment.repetitions = e.value("repetitions", c.experiment.repetitions);
      c.experiment.failure_start_s =
          e.value("failure_start_s", c.experiment.failure_start_s);
      c.experiment.failure_window_s =
          e.value("failure_window_s", c.experiment.failure_window_s);
      c.experiment.horizon_s = e.value("horizon_s", c.experiment.horizon_s);
      if (e.contains("modes")) {
        for (const auto& m : e.at("modes"))
          c.eval_modes.push_back(mode_from_string(m.get<std::string>()));
      }
    }
    if (c.eval_modes.empty())
      c.eval_modes = {ekf::FilterMode::ImuOnly, ekf::FilterMode::AioNoMap};

    // Derived seeds keep every stage deterministic under one knob.
    c.training.seed = derive_seed(c.seed, "train", 0);
    c.gp.seed = derive_seed(c.seed, "map", 0);
    c.experiment.seed = derive_seed(c.seed, "experiment", 0);

    c.noise.validate();
    c.training.validate();
    c.kernel.validate();
    for (const auto& d : c.datasets) d.trajectory.validate();
    for (const auto& d : c.datasets) d.wind.validate();
    for (const auto& n : c.training_datasets) (void)c.dataset(n);
    if (!c.mapping_dataset.empty()) (void)c.dataset(c.mapping_dataset);
    if (!c.eval_dataset.empty()) (void)c.dataset(c.eval_dataset);
    if (c.inducing_points < 1) throw ConfigError("map.inducing_points must be >= 1");
    if (c.odom_every < 1) throw ConfigError("filter.odom_every must be >= 1");
    if (c.wind_sample_hz <= 0.0) throw ConfigError("map.sample_hz must be > 0");
    if (c.wind_burn_in_s < 0.0) throw ConfigError("map.burn_in_s must be >= 0");
    if (c.wind_rw_density < 0.0)
      throw ConfigError("filter.wind_rw_density must be >= 0");
    if (c.map_wind_rw_density < 0.0)
      throw ConfigError("map.wind_rw_density must be >= 0");
    if (c.experiment.repetitions < 1)
      throw ConfigError("experiment.repetitions must be >= 1");
    if (c.experiment.failure_window_s < 0.0)
      throw ConfigError("experiment.failure_window_s must be >= 0");
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_pipeline_config(buf.str());
}

std::string pipeline_config_to_json(const PipelineConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["noise"] = noise_to(c.noise);
  {
    json w;
    w["propwash_gain"] = c.whisker.propwash_gain;
    w["theta_max_rad"] = c.whisker.theta_max_rad;
    w["half_speed_mps"] = c.whisker.half_speed_mps;
    json ms = json::array();
    for (const auto& m : c.whisker.mounts) ms.push_back(vec3_to(log_so3(m)));
    w["mounts"] = ms;
    j["whisker"] = w;
  }
  j["throttle"] = {{"hover", c.throttle.hover},
                   {"gain_per_mps2", c.throttle.gain_per_mps2}};
  json ds = json::array();
  for (const auto& d : c.datasets) {
    json dj;
    dj["name"] = d.name;
    dj["trajectory"] = trajectory_to(d.trajectory);
    dj["wind"] = wind_to(d.wind);
    dj["failure_time_s"] = d.failure_time_s;
    ds.push_back(dj);
  }
  j["datasets"] = ds;
  j["training_datasets"] = c.training_datasets;
  j["mapping_dataset"] = c.mapping_dataset;
  j["eval_dataset"] = c.eval_dataset;
  j["training"] = training_to(c.training);
  j["map"] = {{"signal_var", c.kernel.signal_var},
              {"length_scale", c.kernel.length_scale},
              {"noise_var", c.kernel.noise_var},
              {"inducing_points", c.inducing_points},
              {"exact", c.map_exact},
              {"optimize_hypers", c.gp.optimize_hypers},
              {"max_iters", c.gp.max_iters},
              {"min_noise_var", c.gp.min_noise_var},
              {"burn_in_s", c.wind_burn_in_s},
              {"wind_rw_density", c.map_wind_rw_density},
              {"sample_hz", c.wind_sample_hz}};
  json modes = json::array();
  for (auto m : c.eval_modes) modes.push_back(eval::mode_name(m));
  j["filter"] = {{"wind_rw_density", c.wind_rw_density},
                 {"odom_every", c.odom_every},
                 {"use_odom_v", c.use_odom_v},
                 {"use_odom_att", c.use_odom_att},
                 {"mode", eval::mode_name(c.run_mode)}};
  j["experiment"] = {{"repetitions", c.experiment.repetitions},
                     {"failure_start_s", c.experiment.failure_start_s},
                     {"failure_window_s", c.experiment.failure_window_s},
                     {"horizon_s", c.experiment.horizon_s},
                     {"modes", modes}};
  return j.dump(2);
}

}  // namespace aio::io
