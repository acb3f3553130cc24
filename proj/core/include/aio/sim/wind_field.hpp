// Synthetic stationary wind field: a sum of decaying jets (Gaussian falloff
// radially and axially), differentiable everywhere, plus configuration for
// Ornstein-Uhlenbeck turbulence applied on top of the mean field.
#pragma once

#include <vector>

#include "aio/so3.hpp"

namespace aio::sim {

struct JetSpec {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitY();  // unit vector
  double core_speed_mps = 2.0;
  double radial_decay_m = 1.0;
  double axial_decay_m = 3.0;
};

struct WindFieldSpec {
  std::vector<JetSpec> jets;
  double turbulence_std_mps = 0.0;
  double turbulence_corr_time_s = 0.5;

  void validate() const;
};

/// Mean wind at position p (world frame), a pure function of position.
Vec3 wind_at(const WindFieldSpec& spec, const Vec3& p);

/// Analytic Jacobian d(mean wind)/dp, 3x3.
Mat3 wind_jacobian(const WindFieldSpec& spec, const Vec3& p);

}  // namespace aio::sim
