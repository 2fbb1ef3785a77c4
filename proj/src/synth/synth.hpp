#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "core/scene.hpp"

namespace mogaf::synth {

enum class GroupKind { kRigid, kNonRigid };

struct SynthConfig {
  std::vector<GroupKind> group_kinds;  // one entry per group, K >= 1
  int gaussians_per_group = 40;
  int nonrigid_bases_per_group = 2;
  int num_timesteps = 24;
  int image_width = 128;
  int image_height = 128;
  // Camera orbit around the scene origin.
  double orbit_radius = 8.0;
  double orbit_height = 2.0;
  double orbit_arc = 1.0;  // radians swept over the whole sequence
  double focal = 160.0;
  // Object layout and motion.
  double group_separation = 3.0;  // spacing of group centers
  double object_scale = 0.5;      // sampling radius of each group
  double motion_amplitude = 1.0;  // total travel / rotation scale over T
  double noise_sigma = 0.0;       // per-Gaussian trajectory jitter (scene units)
  int splat_radius = 2;           // mask disk radius in pixels
  // When true, group centers are stacked along the camera viewing axis so
  // projections overlap (occlusion-stress layout).
  bool depth_aligned_layout = false;
  uint64_t seed = 0;

  int num_groups() const { return static_cast<int>(group_kinds.size()); }
  void validate() const;
};

struct GroundTruth {
  // label_of[id] = group index
  std::map<GaussianId, int> labels;
  std::vector<int> tau;  // rigidity flag per group
  // True generating transform per rigid group (empty trajectory for
  // non-rigid groups).
  std::vector<std::vector<SE3Transform>> rigid_trajectories;
  // occlusion[i][t] == 1 when gaussian i (scene order) is hidden at t.
  std::vector<std::vector<uint8_t>> occlusion;

  int num_groups() const { return static_cast<int>(tau.size()); }
};

struct MaskFrame {
  int t = 0;
  int width = 0;
  int height = 0;
  // masks[k][y * width + x] in {0, 255}
  std::vector<std::vector<uint8_t>> masks;
  std::vector<int> tau_mask;

  bool pixel_set(int k, int x, int y) const {
    return x >= 0 && x < width && y >= 0 && y < height &&
           masks[k][static_cast<size_t>(y) * width + x] != 0;
  }
};

// Deterministic scene generator. Rigid groups get one dedicated basis with a
// smooth SE(3) trajectory; non-rigid groups get >= 2 bases with spatially
// smooth blend weights. noise_sigma > 0 adds per-group jitter bases so the
// resulting per-Gaussian deviation from the clean motion has std ~ sigma.
std::pair<DynamicScene, GroundTruth> generate_scene(const SynthConfig& cfg);

// Z-buffered disk-splat rasterization of one frame's instance masks.
MaskFrame rasterize_masks(const DynamicScene& scene, const GroundTruth& gt,
                          int t, int splat_radius = 2);

// Occlusion flags for all timesteps via rasterize_masks (used when evaluating
// a window that generate_scene did not precompute).
std::vector<std::vector<uint8_t>> occlusion_flags(const DynamicScene& scene,
                                                  const GroundTruth& gt,
                                                  int splat_radius = 2);

// Named preset configurations shared by the CLI and the acceptance suite.
SynthConfig preset_config(const std::string& name, uint64_t seed);

}  // namespace mogaf::synth
