#include "aio/sim/sensor_log.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace aio::sim {

namespace {

constexpr const char* kHeader =
    "t,ax,ay,az,gx,gy,gz,"
    "th1x,th1y,th2x,th2y,th3x,th3y,th4x,th4y,"
    "u1,u2,u3,u4,u5,u6,"
    "odom_avail,odom_px,odom_py,odom_pz,odom_vx,odom_vy,odom_vz,"
    "odom_rx,odom_ry,odom_rz,"
    "gt_px,gt_py,gt_pz,gt_vx,gt_vy,gt_vz,gt_rx,gt_ry,gt_rz,"
    "gt_wx,gt_wy,gt_wz,gt_bax,gt_bay,gt_baz,gt_bgx,gt_bgy,gt_bgz";

constexpr int kNumCols = 48;

void put(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  out += buf;
  out += ',';
}

}  // namespace

void write_sensor_log_csv(const SensorLog& log, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  char meta[160];
  std::snprintf(meta, sizeof(meta),
                "# aio-sensor-log v1 rate_hz=%.12g failure_time=%.12g failure_applied=%d\n",
                log.rate_hz, log.failure_time_s, log.failure_applied ? 1 : 0);
  f << meta << kHeader << '\n';
  std::string line;
  for (const auto& r : log.rows) {
    line.clear();
    put(line, r.t);
    for (int i = 0; i < 3; ++i) put(line, r.accel[i]);
    for (int i = 0; i < 3; ++i) put(line, r.gyro[i]);
    for (int i = 0; i < 8; ++i) put(line, r.whisker[i]);
    for (int i = 0; i < 6; ++i) put(line, r.throttle[i]);
    line += r.odom_available ? "1," : "0,";
    for (int i = 0; i < 3; ++i) put(line, r.odom_p[i]);
    for (int i = 0; i < 3; ++i) put(line, r.odom_v[i]);
    const Vec3 odom_r = log_so3(r.odom_R);
    for (int i = 0; i < 3; ++i) put(line, odom_r[i]);
    for (int i = 0; i < 3; ++i) put(line, r.gt_p[i]);
    for (int i = 0; i < 3; ++i) put(line, r.gt_v[i]);
    const Vec3 gt_r = log_so3(r.gt_R);
    for (int i = 0; i < 3; ++i) put(line, gt_r[i]);
    for (int i = 0; i < 3; ++i) put(line, r.gt_wind[i]);
    for (int i = 0; i < 3; ++i) put(line, r.gt_ba[i]);
    for (int i = 0; i < 3; ++i) put(line, r.gt_bg[i]);
    line.back() = '\n';
    f << line;
  }
}

SensorLog read_sensor_log_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open: " + path);
  SensorLog log;
  std::string line;
  if (!std::getline(f, line) || line.rfind("# aio-sensor-log v1", 0) != 0)
    throw std::runtime_error("not an aio-sensor-log v1 file: " + path);
  int applied = 0;
  if (std::sscanf(line.c_str(),
                  "# aio-sensor-log v1 rate_hz=%lf failure_time=%lf failure_applied=%d",
                  &log.rate_hz, &log.failure_time_s, &applied) != 3)
    throw std::runtime_error("bad metadata line in: " + path);
  log.failure_applied = applied != 0;
  if (!std::getline(f, line))
    throw std::runtime_error("missing header row in: " + path);
  double c[kNumCols];
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const char* s = line.c_str();
    char* end = nullptr;
    for (int i = 0; i < kNumCols; ++i) {
      c[i] = std::strtod(s, &end);
      if (end == s) throw std::runtime_error("short row in: " + path);
      s = (*end == ',') ? end + 1 : end;
    }
    SensorRow r;
    int k = 0;
    r.t = c[k++];
    for (int i = 0; i < 3; ++i) r.accel[i] = c[k++];
    for (int i = 0; i < 3; ++i) r.gyro[i] = c[k++];
    for (int i = 0; i < 8; ++i) r.whisker[i] = c[k++];
    for (int i = 0; i < 6; ++i) r.throttle[i] = c[k++];
    r.odom_available = c[k++] != 0.0;
    for (int i = 0; i < 3; ++i) r.odom_p[i] = c[k++];
    for (int i = 0; i < 3; ++i) r.odom_v[i] = c[k++];
    Vec3 odom_r;
    for (int i = 0; i < 3; ++i) odom_r[i] = c[k++];
    r.odom_R = exp_so3(odom_r);
    for (int i = 0; i < 3; ++i) r.gt_p[i] = c[k++];
    for (int i = 0; i < 3; ++i) r.gt_v[i] = c[k++];
    Vec3 gt_r;
    for (int i = 0; i < 3; ++i) gt_r[i] = c[k++];
    r.gt_R = exp_so3(gt_r);
    for (int i = 0; i < 3; ++i) r.gt_wind[i] = c[k++];
    for (int i = 0; i < 3; ++i) r.gt_ba[i] = c[k++];
    for (int i = 0; i < 3; ++i) r.gt_bg[i] = c[k++];
    log.rows.push_back(r);
  }
  return log;
}

}  // namespace aio::sim
