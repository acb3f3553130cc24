#include "aio/so3.hpp"

#include <cmath>

#include <Eigen/LU>

namespace aio {

Mat3 hat(const Vec3& r) {
  Mat3 m;
  m << 0.0, -r.z(), r.y(),
       r.z(), 0.0, -r.x(),
      -r.y(), r.x(), 0.0;
  return m;
}

Vec3 vee(const Mat3& m) {
  return Vec3(0.5 * (m(2, 1) - m(1, 2)),
              0.5 * (m(0, 2) - m(2, 0)),
              0.5 * (m(1, 0) - m(0, 1)));
}

Mat3 exp_so3(const Vec3& phi) {
  const double theta2 = phi.squaredNorm();
  const Mat3 K = hat(phi);
  if (theta2 < 1e-12) {
    // second-order series; error O(theta^3)
    return Mat3::Identity() + K + 0.5 * K * K;
  }
  const double theta = std::sqrt(theta2);
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / theta2;
  return Mat3::Identity() + a * K + b * K * K;
}

Vec3 log_so3(const Mat3& R) {
  const double c = std::clamp(0.5 * (R.trace() - 1.0), -1.0, 1.0);
  const double theta = std::acos(c);
  if (theta < 1e-6) {
    // log(R) ~= skew part, corrected to second order
    return vee(R) * (1.0 + theta * theta / 6.0);
  }
  if (theta > M_PI - 1e-5) {
    // near pi the skew part vanishes; recover the axis from the symmetric
    // part: R ~= I + (1 - cos t) (a a^T - I) with sin t ~ 0
    const Mat3 S = 0.5 * (R + Mat3::Identity());  // ~ a a^T at exactly pi
    Vec3 axis;
    int k;
    S.diagonal().maxCoeff(&k);
    axis[k] = std::sqrt(std::max(S(k, k), 0.0));
    for (int i = 0; i < 3; ++i) {
      if (i != k) axis[i] = S(k, i) / axis[k];
    }
    axis.normalize();
    // fix the sign using the (tiny) skew part so the branch is continuous
    const Vec3 w = vee(R);
    if (w.dot(axis) < 0.0) axis = -axis;
    return theta * axis;
  }
  return vee(R) * (theta / std::sin(theta));
}

Mat3 right_jacobian_so3(const Vec3& phi) {
  const double theta2 = phi.squaredNorm();
  const Mat3 K = hat(phi);
  if (theta2 < 1e-12) {
    return Mat3::Identity() - 0.5 * K + (1.0 / 6.0) * K * K;
  }
  const double theta = std::sqrt(theta2);
  const double a = (1.0 - std::cos(theta)) / theta2;
  const double b = (theta - std::sin(theta)) / (theta2 * theta);
  return Mat3::Identity() - a * K + b * K * K;
}

bool is_rotation(const Mat3& R, double tol) {
  const double ortho = (R * R.transpose() - Mat3::Identity()).norm();
  return ortho < tol && std::abs(R.determinant() - 1.0) < tol;
}

Vec3 zyx_from_rotation(const Mat3& R) {
  const double pitch = std::asin(std::clamp(-R(2, 0), -1.0, 1.0));
  const double yaw = std::atan2(R(1, 0), R(0, 0));
  const double roll = std::atan2(R(2, 1), R(2, 2));
  return Vec3(yaw, pitch, roll);
}

Mat3 rot_z(double yaw) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  Mat3 R;
  R << c, -s, 0.0,
       s, c, 0.0,
       0.0, 0.0, 1.0;
  return R;
}

}  // namespace aio
