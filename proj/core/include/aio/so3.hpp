// SO(3) utilities: hat/vee, exponential and logarithm maps, right Jacobian.
// Rotations are stored as 3x3 matrices mapping body-frame vectors into the
// world frame (R_WB convention).
#pragma once

#include <Eigen/Core>

namespace aio {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Skew-symmetric matrix such that hat(r) * x == r.cross(x).
Mat3 hat(const Vec3& r);

/// Inverse of hat: vee(hat(r)) == r. Uses the skew part of the argument.
Vec3 vee(const Mat3& m);

/// Rodrigues formula with a second-order series branch below 1e-6 rad.
Mat3 exp_so3(const Vec3& phi);

/// Principal logarithm, norm of the result <= pi. The angle == pi case is
/// resolved by axis extraction from the symmetric part.
Vec3 log_so3(const Mat3& R);

/// Right Jacobian of SO(3): exp((phi + d)^) ~= exp(phi^) exp((Jr(phi) d)^).
Mat3 right_jacobian_so3(const Vec3& phi);

/// Orthonormality and determinant check used by invariants and tests.
bool is_rotation(const Mat3& R, double tol = 1e-9);

/// Yaw-pitch-roll (ZYX) extraction; returns [yaw, pitch, roll].
Vec3 zyx_from_rotation(const Mat3& R);

Mat3 rot_z(double yaw);

}  // namespace aio
