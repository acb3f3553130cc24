#include "aio/eval/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace aio::eval {

namespace {

double wrap_pi(double a) {
  a = std::fmod(a + M_PI, 2.0 * M_PI);
  if (a < 0.0) a += 2.0 * M_PI;
  return a - M_PI;
}

void check_aligned(std::size_t a, std::size_t b) {
  if (a == 0 || a != b)
    throw std::invalid_argument("metric inputs must be non-empty and aligned");
}

}  // namespace

double rmse(const std::vector<Vec3>& est, const std::vector<Vec3>& gt) {
  check_aligned(est.size(), gt.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) sum += (est[i] - gt[i]).squaredNorm();
  return std::sqrt(sum / static_cast<double>(est.size()));
}

double yaw_rmse(const std::vector<Mat3>& est, const std::vector<Mat3>& gt) {
  check_aligned(est.size(), gt.size());
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const Vec3 e = zyx_from_rotation(est[i]);
    const Vec3 g = zyx_from_rotation(gt[i]);
    if (std::abs(e[1]) > M_PI / 2.0 - 1e-6 || std::abs(g[1]) > M_PI / 2.0 - 1e-6)
      continue;  // gimbal lock, yaw ill-defined
    const double d = wrap_pi(e[0] - g[0]);
    sum += d * d;
    ++used;
  }
  if (used == 0) throw std::invalid_argument("all samples gimbal-locked");
  return std::sqrt(sum / static_cast<double>(used));
}

std::optional<double> drift(const std::vector<Vec3>& est,
                            const std::vector<Vec3>& gt) {
  check_aligned(est.size(), gt.size());
  if (est.size() < 2)
    throw std::invalid_argument("drift needs at least two samples");
  double path = 0.0;
  for (std::size_t i = 1; i < gt.size(); ++i) path += (gt[i] - gt[i - 1]).norm();
  if (path <= 0.0) return std::nullopt;
  return (est.back() - gt.back()).norm() / path;
}

double rte(const std::vector<Vec3>& est_p, const std::vector<Mat3>& est_R,
           const std::vector<Vec3>& gt_p, const std::vector<Mat3>& gt_R,
           std::size_t window_samples) {
  check_aligned(est_p.size(), gt_p.size());
  check_aligned(est_R.size(), gt_R.size());
  if (window_samples == 0 || window_samples >= est_p.size())
    throw std::invalid_argument("sequence shorter than the RTE window");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i + window_samples < est_p.size(); ++i) {
    const std::size_t j = i + window_samples;
    // R_yaw * R_yaw_hat^T as a single rotation by the yaw difference, so an
    // estimate identical to the ground truth scores exactly zero
    const Mat3 align = rot_z(zyx_from_rotation(gt_R[i])[0] -
                             zyx_from_rotation(est_R[i])[0]);
    const Vec3 r = gt_p[j] - gt_p[i] - align * (est_p[j] - est_p[i]);
    sum += r.squaredNorm();
    ++n;
  }
  return std::sqrt(sum / static_cast<double>(n));
}

Metrics compute_metrics(const std::vector<Vec3>& est_p,
                        const std::vector<Mat3>& est_R,
                        const std::vector<Vec3>& gt_p,
                        const std::vector<Mat3>& gt_R,
                        double rate_hz, double rte_window_s) {
  Metrics m;
  m.rmse_position_m = rmse(est_p, gt_p);
  m.rmse_yaw_rad = yaw_rmse(est_R, gt_R);
  m.dr = drift(est_p, gt_p);
  const std::size_t w = static_cast<std::size_t>(rte_window_s * rate_hz);
  m.rte_2s_m = rte(est_p, est_R, gt_p, gt_R, w);
  return m;
}

}  // namespace aio::eval
