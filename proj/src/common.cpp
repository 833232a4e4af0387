#include "closedlink/common.hpp"

#include <algorithm>
#include <cmath>

namespace closedlink {

Mat3 rpy_to_matrix(const Vec3& rpy) {
  return (Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()) * Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
          Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()))
      .toRotationMatrix();
}

Vec3 matrix_to_rpy(const Mat3& r) {
  const double pitch = std::asin(std::clamp(r(0, 2), -1.0, 1.0));
  return {std::atan2(-r(1, 2), r(2, 2)), pitch, std::atan2(-r(0, 1), r(0, 0))};
}

Mat3 rotation_exp(const Vec3& phi) {
  const double angle = phi.norm();
  if (angle < 1e-300) return Mat3::Identity();
  return Eigen::AngleAxisd(angle, phi / angle).toRotationMatrix();
}

Vec3 rotation_log(const Mat3& r) {
  // Quaternion route is accurate near identity and near pi.
  Eigen::Quaterniond q(r);
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  const Vec3 v = q.vec();
  const double s = v.norm();
  if (s < 1e-300) return Vec3::Zero();
  const double angle = 2.0 * std::atan2(s, q.w());
  return v * (angle / s);
}

namespace {

// k(t) = 1/t^2 - (1 + cos t) / (2 t sin t) and its derivative.
double log_rate_coeff(double t) {
  if (t < 0.1) {
    const double t2 = t * t;
    return 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0 + t2 * t2 * t2 / 1209600.0;
  }
  return 1.0 / (t * t) - (1.0 + std::cos(t)) / (2.0 * t * std::sin(t));
}

double log_rate_coeff_derivative(double t) {
  if (t < 0.1) {
    const double t2 = t * t;
    return t / 360.0 + t * t2 / 7560.0 + t * t2 * t2 / 201600.0;
  }
  const double half = 0.5 * t;
  const double csc = 1.0 / std::sin(half);
  const double cot = std::cos(half) * csc;
  return -2.0 / (t * t * t) + (t * csc * csc + 2.0 * cot) / (4.0 * t * t);
}

}  // namespace

Mat3 log_rate_matrix(const Vec3& phi) {
  const Mat3 s = skew(phi);
  return Mat3::Identity() - 0.5 * s + log_rate_coeff(phi.norm()) * s * s;
}

Mat3 log_rate_matrix_derivative(const Vec3& phi, const Vec3& phi_dot) {
  const double t = phi.norm();
  const Mat3 s = skew(phi);
  const Mat3 sd = skew(phi_dot);
  Mat3 out = -0.5 * sd + log_rate_coeff(t) * (sd * s + s * sd);
  if (t > 1e-300) out += log_rate_coeff_derivative(t) * (phi.dot(phi_dot) / t) * s * s;
  return out;
}

}  // namespace closedlink
