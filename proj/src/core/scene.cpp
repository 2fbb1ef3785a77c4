#include "core/scene.hpp"

#include <cmath>
#include <set>
#include <string>

#include "core/errors.hpp"

namespace mogaf {

std::vector<SE3Transform> MotionBasisSet::at_time(int t) const {
  if (t < 0 || t >= num_timesteps()) {
    throw ConfigError("timestep out of range: " + std::to_string(t));
  }
  std::vector<SE3Transform> out;
  out.reserve(bases.size());
  for (const auto& traj : bases) out.push_back(traj[t]);
  return out;
}

void MotionBasisSet::validate() const {
  if (num_bases() < 1) throw ConfigError("MotionBasisSet: B >= 1 required");
  if (num_timesteps() < 2) throw ConfigError("MotionBasisSet: T >= 2 required");
  const size_t t = bases.front().size();
  for (const auto& traj : bases) {
    if (traj.size() != t) throw ConfigError("MotionBasisSet: ragged trajectories");
  }
}

void Camera::validate() const {
  if (intrinsics(0, 0) <= 0.0 || intrinsics(1, 1) <= 0.0) {
    throw ConfigError("Camera: focal entries must be positive");
  }
  const double cx = intrinsics(0, 2), cy = intrinsics(1, 2);
  if (cx < 0 || cx > width || cy < 0 || cy > height) {
    throw ConfigError("Camera: principal point outside image bounds");
  }
}

void DynamicScene::validate() const {
  motion.validate();
  const int b = motion.num_bases();
  std::set<GaussianId> ids;
  for (const auto& g : gaussians) {
    if (static_cast<int>(g.weights.size()) != b) {
      throw ConfigError("DynamicScene: weight length != num bases");
    }
    double sum = 0.0;
    for (double w : g.weights) {
      if (w < -1e-12) throw ConfigError("DynamicScene: negative blend weight");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw ConfigError("DynamicScene: blend weights must sum to 1");
    }
    if (!ids.insert(g.id).second) {
      throw ConfigError("DynamicScene: duplicate gaussian id " + std::to_string(g.id));
    }
  }
  if (!cameras.empty() &&
      static_cast<int>(cameras.size()) != motion.num_timesteps()) {
    throw ConfigError("DynamicScene: cameras length != num timesteps");
  }
  for (const auto& cam : cameras) cam.validate();
}

int DynamicScene::index_of(GaussianId id) const {
  for (size_t i = 0; i < gaussians.size(); ++i) {
    if (gaussians[i].id == id) return static_cast<int>(i);
  }
  return -1;
}

int TrajectoryTensor::index_of(GaussianId id) const {
  for (size_t i = 0; i < gaussian_ids.size(); ++i) {
    if (gaussian_ids[i] == id) return static_cast<int>(i);
  }
  return -1;
}

std::array<double, 7> TrajectoryTensor::pack(const Eigen::Vector3d& mean,
                                             const Quat& q) {
  return {mean.x(), mean.y(), mean.z(), q.w, q.x, q.y, q.z};
}

DeformedState deform_gaussian(const GaussianCanonical& g,
                              const MotionBasisSet& motion, int t) {
  const SE3Transform blend = blend_transform(g.weights, motion.at_time(t));
  DeformedState out;
  out.mean = blend.apply(g.mean_c);
  out.rot = (blend.rotation * g.rot_c).normalized().canonical();
  return out;
}

Projection project_mean(const Eigen::Vector3d& mean, const Camera& cam) {
  const Eigen::Vector3d p = cam.extrinsics.apply(mean);
  if (p.z() <= 1e-9) {
    throw BehindCameraError("project_mean: point behind camera");
  }
  const Eigen::Vector3d h = cam.intrinsics * p;
  return {h.x() / h.z(), h.y() / h.z(), p.z()};
}

TrajectoryTensor scene_trajectories(const DynamicScene& scene) {
  const int t_count = scene.num_timesteps();
  TrajectoryTensor out;
  out.gaussian_ids.reserve(scene.gaussians.size());
  out.values.reserve(scene.gaussians.size());
  for (const auto& g : scene.gaussians) {
    out.gaussian_ids.push_back(g.id);
    std::vector<std::array<double, 7>> row;
    row.reserve(t_count);
    for (int t = 0; t < t_count; ++t) {
      const DeformedState d = deform_gaussian(g, scene.motion, t);
      row.push_back(TrajectoryTensor::pack(d.mean, d.rot));
    }
    out.values.push_back(std::move(row));
  }
  return out;
}

DynamicScene scene_prefix(const DynamicScene& scene, int obs_timesteps) {
  if (obs_timesteps < 2 || obs_timesteps > scene.num_timesteps()) {
    throw ConfigError("scene_prefix: invalid observation window");
  }
  DynamicScene out = scene;
  for (auto& traj : out.motion.bases) traj.resize(obs_timesteps);
  if (!out.cameras.empty()) out.cameras.resize(obs_timesteps);
  return out;
}

}  // namespace mogaf
