#pragma once

#include <Eigen/Dense>

namespace closedlink {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using Mat3X = Eigen::Matrix<double, 3, Eigen::Dynamic>;
using Mat6X = Eigen::Matrix<double, 6, Eigen::Dynamic>;

/// Rigid transform: p_parent = rotation * p_child + translation.
struct Transform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Transform operator*(const Transform& rhs) const {
    return {rotation * rhs.rotation, rotation * rhs.translation + translation};
  }
  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
};

/// Skew matrix with skew(a) * b == a.cross(b).
inline Mat3 skew(const Vec3& a) {
  Mat3 s;
  s << 0.0, -a.z(), a.y(), a.z(), 0.0, -a.x(), -a.y(), a.x(), 0.0;
  return s;
}

/// Intrinsic X-Y-Z roll/pitch/yaw: R = Rx(roll) * Ry(pitch) * Rz(yaw).
Mat3 rpy_to_matrix(const Vec3& rpy);

/// Inverse of rpy_to_matrix (pitch in [-pi/2, pi/2]).
Vec3 matrix_to_rpy(const Mat3& r);

Mat3 rotation_exp(const Vec3& phi);

/// Principal rotation vector of R (angle in [0, pi]).
Vec3 rotation_log(const Mat3& r);

/// Maps the spatial angular velocity w (R' = [w]x R) to the rate of
/// phi = log(R): phi' = log_rate_matrix(phi) * w.
Mat3 log_rate_matrix(const Vec3& phi);

/// Time derivative of log_rate_matrix(phi) along phi_dot.
Mat3 log_rate_matrix_derivative(const Vec3& phi, const Vec3& phi_dot);

}  // namespace closedlink
