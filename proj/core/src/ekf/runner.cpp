#include "aio/ekf/runner.hpp"

#include <cstdio>
#include <fstream>
#include <unordered_map>

namespace aio::ekf {

FilterRun run_filter(const sim::SensorLog& log, const FilterConfig& config,
                     const airflow::LstmRegressor* model,
                     const windmap::WindMap* map,
                     std::optional<double> odom_cutoff_s) {
  if (log.rows.size() < 2) throw FilterInputError("sensor log too short");
  if (config.mode != FilterMode::ImuOnly && model == nullptr)
    throw FilterInputError("aio modes require a trained airflow model");
  if (config.mode == FilterMode::AioWithMap && map == nullptr)
    throw FilterInputError("aio-with-map requires a fitted wind map");

  ProcessNoiseSpec q = config.noise;
  const windmap::WindMap* attached_map = nullptr;
  if (config.mode == FilterMode::AioWithMap) {
    attached_map = map;
    q.sigma_w.setZero();  // wind error held constant when a map is attached
  }

  // Airflow measurement schedule (25 Hz), keyed by log row.
  std::unordered_map<std::size_t, airflow::AirflowMeasurement> airflow_at;
  if (config.mode != FilterMode::ImuOnly) {
    for (auto& m : airflow::estimate_airflow(*model, log))
      airflow_at.emplace(m.row_index, m);
  }

  auto odom_ok = [&](const sim::SensorRow& r) {
    if (!r.odom_available) return false;
    return !odom_cutoff_s || r.t < *odom_cutoff_s;
  };

  FilterState s;
  const sim::SensorRow& first = log.rows.front();
  s.t = first.t;
  if (odom_ok(first)) {
    s.p = first.odom_p;
    s.v = first.odom_v;
    s.R_ref = first.odom_R;
  } else {
    s.p = first.gt_p;
    s.v = first.gt_v;
    s.R_ref = first.gt_R;
  }
  s.P.setZero();
  s.P.block<3, 3>(kP, kP) = config.init.pos_var * Mat3::Identity();
  s.P.block<3, 3>(kV, kV) = config.init.vel_var * Mat3::Identity();
  s.P.block<3, 3>(kPhi, kPhi) = config.init.att_var * Mat3::Identity();
  s.P.block<3, 3>(kBa, kBa) = config.init.ba_var * Mat3::Identity();
  s.P.block<3, 3>(kBg, kBg) = config.init.bg_var * Mat3::Identity();
  s.P.block<3, 3>(kEw, kEw) = config.init.ew_var * Mat3::Identity();

  FilterRun run;
  run.rows.reserve(log.rows.size());
  auto record = [&](const FilterState& st) {
    EstimateRow row;
    row.t = st.t;
    row.p = st.p;
    row.v = st.v;
    row.R = st.attitude();
    row.ypr = zyx_from_rotation(row.R);
    row.ba = st.ba;
    row.bg = st.bg;
    row.ew = st.ew;
    row.cov_diag = st.P.diagonal();
    run.rows.push_back(row);
  };

  auto apply_updates = [&](std::size_t k) {
    const sim::SensorRow& r = log.rows[k];
    if (odom_ok(r) && k % static_cast<std::size_t>(config.odom_every) == 0) {
      OdomMeasurement m;
      m.p = r.odom_p;
      m.v = r.odom_v;
      m.R = r.odom_R;
      m.cov_p = config.odom_cov_p;
      m.cov_v = config.odom_cov_v;
      m.cov_att = config.odom_cov_att;
      m.use_v = config.use_odom_v;
      m.use_att = config.use_odom_att;
      if (update_odometry(s, m)) ++run.odom_updates;
    }
    if (const auto it = airflow_at.find(k); it != airflow_at.end()) {
      if (update_airflow(s, it->second.v_inf, it->second.cov, attached_map))
        ++run.airflow_updates;
      else
        ++run.airflow_skipped;
    }
  };

  apply_updates(0);
  record(s);
  for (std::size_t k = 1; k < log.rows.size(); ++k) {
    const sim::SensorRow& prev = log.rows[k - 1];
    const double dt = log.rows[k].t - prev.t;
    if (!predict(s, prev.accel, prev.gyro, dt, q)) {
      ++run.predict_rejections;
      s.t = log.rows[k].t;  // stay aligned with the log clock
    }
    apply_updates(k);
    record(s);
  }
  return run;
}

void write_estimate_csv(const FilterRun& run, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << "# aio-estimate v1\n";
  f << "t,px,py,pz,vx,vy,vz,yaw,pitch,roll,"
       "bax,bay,baz,bgx,bgy,bgz,ewx,ewy,ewz";
  for (int i = 0; i < kErrDim; ++i) f << ",cov" << i;
  f << '\n';
  char buf[32];
  std::string line;
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    line += buf;
    line += ',';
  };
  for (const auto& r : run.rows) {
    line.clear();
    put(r.t);
    for (int i = 0; i < 3; ++i) put(r.p[i]);
    for (int i = 0; i < 3; ++i) put(r.v[i]);
    for (int i = 0; i < 3; ++i) put(r.ypr[i]);
    for (int i = 0; i < 3; ++i) put(r.ba[i]);
    for (int i = 0; i < 3; ++i) put(r.bg[i]);
    for (int i = 0; i < 3; ++i) put(r.ew[i]);
    for (int i = 0; i < kErrDim; ++i) put(r.cov_diag[i]);
    line.back() = '\n';
    f << line;
  }
}

}  // namespace aio::ekf
