#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <vector>

namespace mogaf {

// Unit quaternion, scalar-first (w, x, y, z). Canonical sign: w >= 0.
struct Quat {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  static Quat identity() { return {1.0, 0.0, 0.0, 0.0}; }
  static Quat from_axis_angle(const Eigen::Vector3d& axis, double angle);
  // Exponential map of a rotation vector (axis * angle).
  static Quat exp_map(const Eigen::Vector3d& rotvec);

  double norm() const;
  Quat normalized() const;
  // Flips sign so that w >= 0.
  Quat canonical() const;
  Quat conjugate() const { return {w, -x, -y, -z}; }

  double dot(const Quat& o) const { return w * o.w + x * o.x + y * o.y + z * o.z; }
  Quat operator*(const Quat& o) const;  // Hamilton product
  Eigen::Vector3d rotate(const Eigen::Vector3d& v) const;
  Eigen::Matrix3d to_matrix() const;
  static Quat from_matrix(const Eigen::Matrix3d& r);

  Eigen::Vector4d coeffs() const { return {w, x, y, z}; }
  static Quat from_coeffs(const Eigen::Vector4d& c) { return {c[0], c[1], c[2], c[3]}; }
};

// Angle of the relative rotation between two unit quaternions, in radians.
double quat_angle(const Quat& a, const Quat& b);

// Jacobian of R(q) * v with respect to the (unnormalized) quaternion q,
// evaluated at unit q. 3x4 in (w, x, y, z) order.
Eigen::Matrix<double, 3, 4> rotate_jacobian_wrt_quat(const Quat& q,
                                                     const Eigen::Vector3d& v);

// Rigid transform: p -> R(rotation) * p + translation.
struct SE3Transform {
  Quat rotation;
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static SE3Transform identity() { return {}; }

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return rotation.rotate(p) + translation;
  }
  SE3Transform compose(const SE3Transform& inner) const;
  SE3Transform inverse() const;
};

// Weighted SE(3) blend: translations combine linearly, rotations by
// sign-aligned normalized quaternion averaging (QLERP). Weights are expected
// to be a convex combination. Throws DimensionError on length mismatch and
// DegenerateBlendError when the quaternion sum cancels.
SE3Transform blend_transform(const std::vector<double>& weights,
                             const std::vector<SE3Transform>& bases_at_t);

}  // namespace mogaf
