#pragma once

#include <Eigen/Core>
#include <map>
#include <set>
#include <vector>

#include "core/scene.hpp"
#include "synth/synth.hpp"

namespace mogaf::grouping {

struct MotionGroup {
  std::set<GaussianId> member_ids;
  int tau = 0;
};

struct MemoryBank {
  std::vector<MotionGroup> groups;

  // Group index of an id, or -1 when unassigned.
  int group_of(GaussianId id) const;
  std::set<GaussianId> assigned_ids() const;
  void check_disjoint() const;
};

struct GroupingParams {
  double front_fraction = 0.40;
  int pca_dims = 3;
  double pca_scale = 0.3;
  double radius_multiplier = 2.0;  // alpha
  int knn_k = 5;                   // neighbor count for the adaptive radius
  double overlap_threshold = 0.25; // theta_ov
  int vote_k = 8;
  double reassign_fraction = 0.5;
  int keyframe_stride = 4;
  // Gate keyframe merges in group_scene by the overlap threshold (off by
  // default; the gate always applies in group_naive4d).
  bool gate_keyframe_merge = false;

  void validate() const;
};

// Feature matrix: one row per gaussian (scene order), [mean_c ; scale * pca(w)].
using FeatureMatrix = Eigen::MatrixXd;

// Seed selection: ids projecting inside mask k at t, keeping the nearest
// ceil(front_fraction * count) by depth.
std::set<GaussianId> select_front_gaussians(const DynamicScene& scene,
                                            const synth::MaskFrame& frame,
                                            int group_k, double front_fraction);

// Pure membership test of projected deformed means against each mask raster.
std::vector<std::set<GaussianId>> associate_by_projection(
    const DynamicScene& scene, const synth::MaskFrame& frame);

// |group ∩ new_set| / |new_set|. Throws on empty new_set.
double shared_overlap(const MotionGroup& bank_group,
                      const std::set<GaussianId>& new_set);

// Naive 4D extension: init from the first frame, merge per-frame in-mask sets
// gated by the overlap threshold, first assignment wins.
MemoryBank group_naive4d(const DynamicScene& scene,
                         const std::vector<synth::MaskFrame>& masks,
                         const GroupingParams& params);

// [mean_c ; pca_scale * PCA-reduced blend weights] per gaussian, with a
// deterministic component-sign rule.
FeatureMatrix compute_features(const DynamicScene& scene,
                               const GroupingParams& params);

// alpha * mean over members of (mean distance to their knn_k nearest
// neighbors within the group). member_rows indexes into features.
double adaptive_radius(const FeatureMatrix& features,
                       const std::vector<int>& member_rows, int knn_k,
                       double alpha);

// Fixed-point feature-space region growing, groups visited in index order.
void region_grow(MemoryBank& bank, const DynamicScene& scene,
                 const FeatureMatrix& features, const GroupingParams& params);

// KNN majority vote over labeled gaussians; commits only the closest
// reassign_fraction of the unassigned set.
void knn_vote_reassign(MemoryBank& bank, const DynamicScene& scene,
                       const FeatureMatrix& features, int vote_k,
                       double reassign_fraction);

// Full motion-aware grouping: keyframe seeding alternated with region
// growing, then KNN-vote reassignment.
MemoryBank group_scene(const DynamicScene& scene,
                       const std::vector<synth::MaskFrame>& masks,
                       const GroupingParams& params);

// Fraction of gaussians whose bank group matches the oracle label
// (unassigned counts as wrong).
double label_accuracy(const MemoryBank& bank, const DynamicScene& scene,
                      const synth::GroundTruth& gt);

}  // namespace mogaf::grouping
