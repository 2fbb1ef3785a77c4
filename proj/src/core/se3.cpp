#include "core/se3.hpp"

#include <cmath>

#include "core/errors.hpp"

namespace mogaf {

Quat Quat::from_axis_angle(const Eigen::Vector3d& axis, double angle) {
  const double n = axis.norm();
  if (n < 1e-300) return identity();
  return exp_map(axis * (angle / n));
}

Quat Quat::exp_map(const Eigen::Vector3d& rotvec) {
  const double angle = rotvec.norm();
  const double half = 0.5 * angle;
  double k;  // sin(half)/angle, stable near zero
  if (angle < 1e-8) {
    k = 0.5 - angle * angle / 48.0;
  } else {
    k = std::sin(half) / angle;
  }
  return Quat{std::cos(half), k * rotvec.x(), k * rotvec.y(), k * rotvec.z()};
}

double Quat::norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

Quat Quat::normalized() const {
  const double n = norm();
  if (n < 1e-300) throw NumericalError("cannot normalize zero quaternion");
  return {w / n, x / n, y / n, z / n};
}

Quat Quat::canonical() const {
  if (w < 0.0) return {-w, -x, -y, -z};
  return *this;
}

Quat Quat::operator*(const Quat& o) const {
  return {w * o.w - x * o.x - y * o.y - z * o.z,
          w * o.x + x * o.w + y * o.z - z * o.y,
          w * o.y - x * o.z + y * o.w + z * o.x,
          w * o.z + x * o.y - y * o.x + z * o.w};
}

Eigen::Vector3d Quat::rotate(const Eigen::Vector3d& v) const {
  // v + 2w (u x v) + 2 u x (u x v), with u = (x, y, z)
  const Eigen::Vector3d u(x, y, z);
  const Eigen::Vector3d uv = u.cross(v);
  return v + 2.0 * (w * uv + u.cross(uv));
}

Eigen::Matrix3d Quat::to_matrix() const {
  Eigen::Matrix3d r;
  const double xx = x * x, yy = y * y, zz = z * z;
  const double xy = x * y, xz = x * z, yz = y * z;
  const double wx = w * x, wy = w * y, wz = w * z;
  r << 1 - 2 * (yy + zz), 2 * (xy - wz), 2 * (xz + wy),
       2 * (xy + wz), 1 - 2 * (xx + zz), 2 * (yz - wx),
       2 * (xz - wy), 2 * (yz + wx), 1 - 2 * (xx + yy);
  return r;
}

Quat Quat::from_matrix(const Eigen::Matrix3d& r) {
  // Shepperd's method.
  Quat q;
  const double tr = r.trace();
  if (tr > 0.0) {
    double s = std::sqrt(tr + 1.0) * 2.0;
    q.w = 0.25 * s;
    q.x = (r(2, 1) - r(1, 2)) / s;
    q.y = (r(0, 2) - r(2, 0)) / s;
    q.z = (r(1, 0) - r(0, 1)) / s;
  } else if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
    double s = std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2)) * 2.0;
    q.w = (r(2, 1) - r(1, 2)) / s;
    q.x = 0.25 * s;
    q.y = (r(0, 1) + r(1, 0)) / s;
    q.z = (r(0, 2) + r(2, 0)) / s;
  } else if (r(1, 1) > r(2, 2)) {
    double s = std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2)) * 2.0;
    q.w = (r(0, 2) - r(2, 0)) / s;
    q.x = (r(0, 1) + r(1, 0)) / s;
    q.y = 0.25 * s;
    q.z = (r(1, 2) + r(2, 1)) / s;
  } else {
    double s = std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1)) * 2.0;
    q.w = (r(1, 0) - r(0, 1)) / s;
    q.x = (r(0, 2) + r(2, 0)) / s;
    q.y = (r(1, 2) + r(2, 1)) / s;
    q.z = 0.25 * s;
  }
  return q.normalized().canonical();
}

double quat_angle(const Quat& a, const Quat& b) {
  // atan2 of the relative rotation keeps full precision near 0, where the
  // acos-of-dot form bottoms out around sqrt(machine epsilon).
  const Quat rel = a.conjugate() * b;
  const double vec = std::sqrt(rel.x * rel.x + rel.y * rel.y + rel.z * rel.z);
  return 2.0 * std::atan2(vec, std::abs(rel.w));
}

Eigen::Matrix<double, 3, 4> rotate_jacobian_wrt_quat(const Quat& q,
                                                     const Eigen::Vector3d& v) {
  const Eigen::Vector3d u(q.x, q.y, q.z);
  Eigen::Matrix<double, 3, 4> j;
  Eigen::Matrix3d vx;
  vx << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  // d(Rv)/dw = 2 (u x v)
  j.col(0) = 2.0 * u.cross(v);
  // d(Rv)/du = 2 ( u v^T + (u.v) I - 2 v u^T - w [v]_x )
  j.block<3, 3>(0, 1) =
      2.0 * (u * v.transpose() + u.dot(v) * Eigen::Matrix3d::Identity() -
             2.0 * v * u.transpose() - q.w * vx);
  return j;
}

SE3Transform SE3Transform::compose(const SE3Transform& inner) const {
  SE3Transform out;
  out.rotation = (rotation * inner.rotation).normalized().canonical();
  out.translation = rotation.rotate(inner.translation) + translation;
  return out;
}

SE3Transform SE3Transform::inverse() const {
  SE3Transform out;
  out.rotation = rotation.conjugate().canonical();
  out.translation = -out.rotation.rotate(translation);
  return out;
}

SE3Transform blend_transform(const std::vector<double>& weights,
                             const std::vector<SE3Transform>& bases_at_t) {
  if (weights.size() != bases_at_t.size()) {
    throw DimensionError("blend_transform: weights/bases length mismatch");
  }
  if (weights.empty()) {
    throw DimensionError("blend_transform: empty blend");
  }
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  Eigen::Vector4d qsum = Eigen::Vector4d::Zero();
  const Eigen::Vector4d qref = bases_at_t.front().rotation.coeffs();
  for (size_t b = 0; b < weights.size(); ++b) {
    t += weights[b] * bases_at_t[b].translation;
    Eigen::Vector4d qb = bases_at_t[b].rotation.coeffs();
    if (qb.dot(qref) < 0.0) qb = -qb;  // sign alignment against basis 0
    qsum += weights[b] * qb;
  }
  const double n = qsum.norm();
  if (n < 1e-12) {
    throw DegenerateBlendError("blend_transform: quaternion sum cancelled");
  }
  SE3Transform out;
  out.rotation = Quat::from_coeffs(qsum / n).canonical();
  out.translation = t;
  return out;
}

}  // namespace mogaf
