#include "aio/sim/wind_field.hpp"

#include <cmath>
#include <stdexcept>

namespace aio::sim {

void WindFieldSpec::validate() const {
  for (const auto& jet : jets) {
    if (jet.radial_decay_m <= 0.0 || jet.axial_decay_m <= 0.0)
      throw std::invalid_argument("jet decay lengths must be positive");
    if (jet.core_speed_mps < 0.0)
      throw std::invalid_argument("jet core speed must be non-negative");
    if (std::abs(jet.direction.norm() - 1.0) > 1e-6)
      throw std::invalid_argument("jet direction must be a unit vector");
  }
  if (turbulence_std_mps < 0.0 || turbulence_corr_time_s <= 0.0)
    throw std::invalid_argument("invalid turbulence parameters");
}

Vec3 wind_at(const WindFieldSpec& spec, const Vec3& p) {
  Vec3 w = Vec3::Zero();
  for (const auto& jet : spec.jets) {
    const Vec3 r = p - jet.origin;
    const double s = r.dot(jet.direction);
    const Vec3 rp = r - s * jet.direction;
    const double q = rp.squaredNorm() / (2.0 * jet.radial_decay_m * jet.radial_decay_m) +
                     s * s / (2.0 * jet.axial_decay_m * jet.axial_decay_m);
    w += jet.core_speed_mps * std::exp(-q) * jet.direction;
  }
  return w;
}

Mat3 wind_jacobian(const WindFieldSpec& spec, const Vec3& p) {
  Mat3 J = Mat3::Zero();
  for (const auto& jet : spec.jets) {
    const Vec3 r = p - jet.origin;
    const double s = r.dot(jet.direction);
    const Vec3 rp = r - s * jet.direction;
    const double q = rp.squaredNorm() / (2.0 * jet.radial_decay_m * jet.radial_decay_m) +
                     s * s / (2.0 * jet.axial_decay_m * jet.axial_decay_m);
    const Vec3 grad_q = rp / (jet.radial_decay_m * jet.radial_decay_m) +
                        (s / (jet.axial_decay_m * jet.axial_decay_m)) * jet.direction;
    J -= jet.core_speed_mps * std::exp(-q) * jet.direction * grad_q.transpose();
  }
  return J;
}

}  // namespace aio::sim
