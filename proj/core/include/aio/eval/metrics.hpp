// Trajectory error metrics: position RMSE, yaw RMSE (ZYX, wrapped), drift
// ratio, and yaw-compensated relative translation error over fixed windows.
#pragma once

#include <optional>
#include <vector>

#include "aio/so3.hpp"

namespace aio::eval {

struct Metrics {
  double rmse_position_m = 0.0;
  double rmse_yaw_rad = 0.0;
  std::optional<double> dr;  // undefined when the ground-truth path length is 0
  double rte_2s_m = 0.0;
};

/// sqrt(mean |est - gt|^2) over aligned samples. Throws on empty input.
double rmse(const std::vector<Vec3>& est, const std::vector<Vec3>& gt);

/// RMSE of wrapped ZYX yaw differences; samples within 1e-6 of gimbal lock
/// (|pitch| near pi/2) are excluded.
double yaw_rmse(const std::vector<Mat3>& est, const std::vector<Mat3>& gt);

/// Final position error divided by the cumulative ground-truth path length.
std::optional<double> drift(const std::vector<Vec3>& est,
                            const std::vector<Vec3>& gt);

/// sqrt(1/N sum_i |p_{i+w} - p_i - Ryaw_i Ryaw_hat_i^T (phat_{i+w} - phat_i)|^2)
/// with w the window in samples.
double rte(const std::vector<Vec3>& est_p, const std::vector<Mat3>& est_R,
           const std::vector<Vec3>& gt_p, const std::vector<Mat3>& gt_R,
           std::size_t window_samples);

Metrics compute_metrics(const std::vector<Vec3>& est_p,
                        const std::vector<Mat3>& est_R,
                        const std::vector<Vec3>& gt_p,
                        const std::vector<Mat3>& gt_R,
                        double rate_hz, double rte_window_s = 2.0);

}  // namespace aio::eval
