#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <vector>

#include "core/se3.hpp"

namespace mogaf {

using GaussianId = int64_t;

// Canonical-space Gaussian: position, orientation, and convex blend weights
// over the scene's motion bases.
struct GaussianCanonical {
  GaussianId id = 0;
  Eigen::Vector3d mean_c = Eigen::Vector3d::Zero();
  Quat rot_c;
  std::vector<double> weights;
};

// B motion bases, each an SE(3) trajectory over T timesteps.
struct MotionBasisSet {
  // bases[b][t]
  std::vector<std::vector<SE3Transform>> bases;

  int num_bases() const { return static_cast<int>(bases.size()); }
  int num_timesteps() const {
    return bases.empty() ? 0 : static_cast<int>(bases.front().size());
  }
  // Column of all basis transforms at timestep t.
  std::vector<SE3Transform> at_time(int t) const;
  void validate() const;
};

// Pinhole camera: K intrinsics (pixels), E world->camera extrinsics.
struct Camera {
  Eigen::Matrix3d intrinsics = Eigen::Matrix3d::Identity();
  SE3Transform extrinsics;
  int width = 0;
  int height = 0;

  void validate() const;
};

struct DynamicScene {
  std::vector<GaussianCanonical> gaussians;
  MotionBasisSet motion;
  std::vector<Camera> cameras;  // one per timestep

  int num_timesteps() const { return motion.num_timesteps(); }
  void validate() const;
  int index_of(GaussianId id) const;  // -1 if absent
};

// Per-Gaussian sequences of [mx, my, mz, qw, qx, qy, qz].
struct TrajectoryTensor {
  std::vector<GaussianId> gaussian_ids;
  // values[i][t] is the 7-vector of gaussian_ids[i] at local timestep t.
  std::vector<std::vector<std::array<double, 7>>> values;
  // Absolute timestep of local index 0 (future tensors start at T_obs).
  int start_timestep = 0;

  int length() const {
    return values.empty() ? 0 : static_cast<int>(values.front().size());
  }
  int index_of(GaussianId id) const;
  static std::array<double, 7> pack(const Eigen::Vector3d& mean, const Quat& q);
  static Eigen::Vector3d mean_of(const std::array<double, 7>& v) {
    return {v[0], v[1], v[2]};
  }
  static Quat quat_of(const std::array<double, 7>& v) {
    return {v[3], v[4], v[5], v[6]};
  }
};

// Blended deformation of one Gaussian at timestep t.
struct DeformedState {
  Eigen::Vector3d mean;
  Quat rot;
};
DeformedState deform_gaussian(const GaussianCanonical& g,
                              const MotionBasisSet& motion, int t);

// Perspective projection of a world point. Throws BehindCameraError when the
// camera-space depth is <= 1e-9.
struct Projection {
  double u;
  double v;
  double depth;
};
Projection project_mean(const Eigen::Vector3d& mean, const Camera& cam);

// Full deformed trajectory table of a scene.
TrajectoryTensor scene_trajectories(const DynamicScene& scene);

// Scene restricted to its first obs_timesteps frames (bases and cameras
// truncated; gaussians unchanged).
DynamicScene scene_prefix(const DynamicScene& scene, int obs_timesteps);

}  // namespace mogaf
