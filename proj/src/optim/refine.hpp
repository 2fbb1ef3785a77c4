#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <vector>

#include "core/scene.hpp"
#include "grouping/grouping.hpp"
#include "rigidfit/procrustes.hpp"

namespace mogaf::optim {

struct OptimParams {
  double lambda_rigid = 0.1;
  double lambda_nr = 0.02;
  double lambda_fit = 1.0;
  int nn_count = 5;  // neighbor count for the non-rigid smoothness graph
  double learning_rate = 0.05;
  int steps = 100;
  double tolerance = 1e-12;     // stop when the total loss plateaus
  int rigid_refresh = 10;       // Procrustes anchors re-fitted every R steps
  int max_halvings = 20;

  void validate() const;
};

struct OptimReport {
  std::vector<double> fit_loss;
  std::vector<double> rigid_loss;
  std::vector<double> nr_loss;
  std::vector<double> motion_loss;
  std::vector<double> total_loss;
  std::vector<double> grad_norm;
  int accepted_steps = 0;
  double wall_time_sec = 0.0;
};

// Directed neighbor pairs (scene indices) within one group.
using NeighborPairs = std::vector<std::pair<int, int>>;

// k-nearest-neighbor graph on canonical means, restricted to the group.
NeighborPairs build_neighbor_pairs(const DynamicScene& scene,
                                   const grouping::MotionGroup& group,
                                   int nn_count);

// Sum over t and group members of squared deviation between deformed means
// and the anchored rigid positions.
double rigid_loss(const DynamicScene& scene, const grouping::MotionGroup& group,
                  const rigidfit::RigidTrajectory& rigid_traj);

// Sum over directed neighbor pairs of squared blend-weight differences.
double nonrigid_loss(const DynamicScene& scene,
                     const grouping::MotionGroup& group,
                     const NeighborPairs& neighbor_graph);

// Rigidity-gated weighted sum over all groups.
double motion_loss(const DynamicScene& scene, const grouping::MemoryBank& bank,
                   const std::map<int, rigidfit::RigidTrajectory>& rigid_trajs,
                   const OptimParams& params);

// Mean squared deviation between deformed means and observed means,
// normalized by gaussian count times timestep count.
double fit_loss(const DynamicScene& scene, const TrajectoryTensor& observed);

// Refined scene via projected gradient descent with backtracking on
// L_total = lambda_fit * L_fit + L_motion. Parameters: basis translations,
// local axis-angle rotation increments, blend weights (simplex-projected).
std::pair<DynamicScene, OptimReport> refine(const DynamicScene& scene,
                                            const grouping::MemoryBank& bank,
                                            const TrajectoryTensor& observed,
                                            const OptimParams& params);

// Max relative error between the analytic gradient of L_total and central
// finite differences over randomly probed parameter coordinates.
double check_gradients(const DynamicScene& scene,
                       const grouping::MemoryBank& bank,
                       const TrajectoryTensor& observed,
                       const OptimParams& params, int probes,
                       uint64_t seed = 0);

}  // namespace mogaf::optim
