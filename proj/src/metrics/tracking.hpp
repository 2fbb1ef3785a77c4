#pragma once

#include <optional>
#include <vector>

#include "core/scene.hpp"

namespace mogaf::metrics {

// Occlusion flags aligned with a ground-truth tensor: occluded[i][t] for
// gaussian_ids[i] at local timestep t (true = not visible).
using OcclusionFlags = std::vector<std::vector<bool>>;

struct TrackingReport {
  double epe = 0.0;
  double delta3d_10 = 0.0;  // percent
  double delta3d_05 = 0.0;  // percent
  std::optional<double> aj;            // percent; absent without occlusion GT
  double delta_avg_2d = 0.0;           // percent
  std::optional<double> oa;            // percent; absent without occlusion GT
  long evaluated_points = 0;
};

struct Metrics2d {
  std::optional<double> aj;
  double delta_avg = 0.0;
  std::optional<double> oa;
};

// Mean Euclidean distance between predicted and ground-truth means over all
// (gaussian, timestep) pairs. Ids and window must align.
double epe_3d(const TrajectoryTensor& pred, const TrajectoryTensor& gt);

// Percent of points with 3D error strictly below threshold_fraction times
// the ground-truth bounding-box diagonal of the evaluated window.
double delta_3d(const TrajectoryTensor& pred, const TrajectoryTensor& gt,
                double threshold_fraction);

// Same with an absolute distance threshold in scene units.
double delta_3d_abs(const TrajectoryTensor& pred, const TrajectoryTensor& gt,
                    double threshold);

// Pixel-space metrics at thresholds {1,2,4,8,16} with the image normalized
// to 256 px on the long side. cameras[t] views local timestep t. AJ and OA
// need occlusion ground truth; delta_avg is computed over GT-visible points
// (all points when occlusion is absent).
Metrics2d metrics_2d(const TrajectoryTensor& pred, const TrajectoryTensor& gt,
                     const std::vector<Camera>& cameras,
                     const OcclusionFlags* occlusion_gt);

TrackingReport evaluate(const TrajectoryTensor& pred,
                        const TrajectoryTensor& gt,
                        const std::vector<Camera>& cameras,
                        const OcclusionFlags* occlusion_gt);

}  // namespace mogaf::metrics
