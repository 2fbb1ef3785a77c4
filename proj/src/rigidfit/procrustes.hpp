#pragma once

#include <Eigen/Core>
#include <vector>

#include "core/scene.hpp"
#include "grouping/grouping.hpp"

namespace mogaf::rigidfit {

struct RigidTrajectory {
  int group_index = 0;
  std::vector<SE3Transform> transforms;  // one per timestep
};

struct ProcrustesFit {
  SE3Transform transform;
  double rms_residual = 0.0;
};

// Least-squares rigid alignment target ~= R * source + t via centered
// cross-covariance SVD with determinant correction. Requires >= 3 points and
// centered rank >= 2.
ProcrustesFit fit_procrustes(const std::vector<Eigen::Vector3d>& source,
                             const std::vector<Eigen::Vector3d>& target);

// Translation-only fallback (mean offset) used for groups smaller than 3.
ProcrustesFit fit_translation(const std::vector<Eigen::Vector3d>& source,
                              const std::vector<Eigen::Vector3d>& target);

// Per-timestep Procrustes fits from canonical means to deformed means.
RigidTrajectory init_rigid_trajectories(const DynamicScene& scene,
                                        const grouping::MotionGroup& group,
                                        int group_index = 0);

}  // namespace mogaf::rigidfit
