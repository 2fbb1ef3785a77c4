#include "rigidfit/procrustes.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>
#include <cmath>

#include "core/errors.hpp"

namespace mogaf::rigidfit {

namespace {

double rms(const std::vector<Eigen::Vector3d>& source,
           const std::vector<Eigen::Vector3d>& target,
           const SE3Transform& tf) {
  double sq = 0.0;
  for (size_t i = 0; i < source.size(); ++i) {
    sq += (tf.apply(source[i]) - target[i]).squaredNorm();
  }
  return std::sqrt(sq / static_cast<double>(source.size()));
}

}  // namespace

ProcrustesFit fit_translation(const std::vector<Eigen::Vector3d>& source,
                              const std::vector<Eigen::Vector3d>& target) {
  if (source.empty() || source.size() != target.size()) {
    throw DimensionError("fit_translation: size mismatch or empty input");
  }
  Eigen::Vector3d offset = Eigen::Vector3d::Zero();
  for (size_t i = 0; i < source.size(); ++i) offset += target[i] - source[i];
  ProcrustesFit fit;
  fit.transform.translation = offset / static_cast<double>(source.size());
  fit.rms_residual = rms(source, target, fit.transform);
  return fit;
}

ProcrustesFit fit_procrustes(const std::vector<Eigen::Vector3d>& source,
                             const std::vector<Eigen::Vector3d>& target) {
  if (source.size() != target.size()) {
    throw DimensionError("fit_procrustes: point-count mismatch");
  }
  const size_t n = source.size();
  if (n < 3) {
    throw DegenerateGeometryError("fit_procrustes: need >= 3 points");
  }
  Eigen::Vector3d cs = Eigen::Vector3d::Zero(), ct = Eigen::Vector3d::Zero();
  for (size_t i = 0; i < n; ++i) {
    cs += source[i];
    ct += target[i];
  }
  cs /= static_cast<double>(n);
  ct /= static_cast<double>(n);

  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (size_t i = 0; i < n; ++i) {
    h += (source[i] - cs) * (target[i] - ct).transpose();
  }
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sv = svd.singularValues();
  if (sv(1) <= 1e-12 * std::max(1.0, sv(0))) {
    throw DegenerateGeometryError("fit_procrustes: rank-deficient geometry");
  }
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) {
    d(2, 2) = -1.0;  // flip the smallest singular direction
  }
  const Eigen::Matrix3d r = svd.matrixV() * d * svd.matrixU().transpose();

  ProcrustesFit fit;
  fit.transform.rotation = Quat::from_matrix(r);
  fit.transform.translation = ct - r * cs;
  fit.rms_residual = rms(source, target, fit.transform);
  return fit;
}

RigidTrajectory init_rigid_trajectories(const DynamicScene& scene,
                                        const grouping::MotionGroup& group,
                                        int group_index) {
  if (group.tau != 1) {
    throw ConfigError("init_rigid_trajectories: group is not rigid");
  }
  std::vector<Eigen::Vector3d> canonical;
  std::vector<const GaussianCanonical*> members;
  for (const auto& g : scene.gaussians) {
    if (group.member_ids.count(g.id)) {
      canonical.push_back(g.mean_c);
      members.push_back(&g);
    }
  }
  const bool translation_only = canonical.size() < 3;

  RigidTrajectory traj;
  traj.group_index = group_index;
  const int t_count = scene.num_timesteps();
  traj.transforms.reserve(t_count);
  for (int t = 0; t < t_count; ++t) {
    std::vector<Eigen::Vector3d> deformed;
    deformed.reserve(members.size());
    for (const auto* g : members) {
      deformed.push_back(deform_gaussian(*g, scene.motion, t).mean);
    }
    const ProcrustesFit fit = translation_only
                                  ? fit_translation(canonical, deformed)
                                  : fit_procrustes(canonical, deformed);
    traj.transforms.push_back(fit.transform);
  }
  return traj;
}

}  // namespace mogaf::rigidfit
