#include "grouping/grouping.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>

#include "core/errors.hpp"

namespace mogaf::grouping {

namespace {

struct ProjectedGaussian {
  int row;  // scene index
  GaussianId id;
  double depth;
};

// In-mask gaussians of group k at the frame's timestep, with depths.
std::vector<ProjectedGaussian> in_mask(const DynamicScene& scene,
                                       const synth::MaskFrame& frame,
                                       int group_k) {
  std::vector<ProjectedGaussian> out;
  const Camera& cam = scene.cameras.at(frame.t);
  for (size_t i = 0; i < scene.gaussians.size(); ++i) {
    const auto& g = scene.gaussians[i];
    try {
      const DeformedState d = deform_gaussian(g, scene.motion, frame.t);
      const Projection p = project_mean(d.mean, cam);
      const int px = static_cast<int>(std::floor(p.u));
      const int py = static_cast<int>(std::floor(p.v));
      if (frame.pixel_set(group_k, px, py)) {
        out.push_back({static_cast<int>(i), g.id, p.depth});
      }
    } catch (const BehindCameraError&) {
      // off-screen: not a member
    }
  }
  return out;
}

std::vector<int> member_rows(const DynamicScene& scene,
                             const MotionGroup& group) {
  std::vector<int> rows;
  rows.reserve(group.member_ids.size());
  for (size_t i = 0; i < scene.gaussians.size(); ++i) {
    if (group.member_ids.count(scene.gaussians[i].id)) {
      rows.push_back(static_cast<int>(i));
    }
  }
  return rows;
}

// Mean distance from each row to the rest of the scene's nearest neighbor
// (singleton-group fallback radius).
double global_mean_nn_distance(const FeatureMatrix& features) {
  const int n = static_cast<int>(features.rows());
  if (n < 2) return 0.0;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      best = std::min(best, (features.row(i) - features.row(j)).norm());
    }
    sum += best;
  }
  return sum / n;
}

void merge_without_stealing(MemoryBank& bank, int k,
                            const std::set<GaussianId>& ids) {
  for (GaussianId id : ids) {
    if (bank.group_of(id) < 0) bank.groups[k].member_ids.insert(id);
  }
}

}  // namespace

void GroupingParams::validate() const {
  if (front_fraction <= 0.0 || front_fraction > 1.0) {
    throw ConfigError("GroupingParams: front_fraction in (0,1] required");
  }
  if (radius_multiplier < 0.0) throw ConfigError("GroupingParams: alpha >= 0");
  if (overlap_threshold < 0.0 || overlap_threshold > 1.0) {
    throw ConfigError("GroupingParams: overlap threshold in [0,1]");
  }
  if (reassign_fraction < 0.0 || reassign_fraction > 1.0) {
    throw ConfigError("GroupingParams: reassign fraction in [0,1]");
  }
  if (pca_dims < 1 || knn_k < 1 || vote_k < 1 || keyframe_stride < 1) {
    throw ConfigError("GroupingParams: counts must be >= 1");
  }
}

int MemoryBank::group_of(GaussianId id) const {
  for (size_t k = 0; k < groups.size(); ++k) {
    if (groups[k].member_ids.count(id)) return static_cast<int>(k);
  }
  return -1;
}

std::set<GaussianId> MemoryBank::assigned_ids() const {
  std::set<GaussianId> out;
  for (const auto& g : groups) out.insert(g.member_ids.begin(), g.member_ids.end());
  return out;
}

void MemoryBank::check_disjoint() const {
  std::set<GaussianId> seen;
  for (const auto& g : groups) {
    for (GaussianId id : g.member_ids) {
      if (!seen.insert(id).second) {
        throw NumericalError("MemoryBank: gaussian in two groups");
      }
    }
  }
}

std::set<GaussianId> select_front_gaussians(const DynamicScene& scene,
                                            const synth::MaskFrame& frame,
                                            int group_k,
                                            double front_fraction) {
  auto hits = in_mask(scene, frame, group_k);
  std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) {
    return a.depth != b.depth ? a.depth < b.depth : a.id < b.id;
  });
  const size_t keep = static_cast<size_t>(
      std::ceil(front_fraction * static_cast<double>(hits.size())));
  std::set<GaussianId> out;
  for (size_t i = 0; i < std::min(keep, hits.size()); ++i) {
    out.insert(hits[i].id);
  }
  return out;
}

std::vector<std::set<GaussianId>> associate_by_projection(
    const DynamicScene& scene, const synth::MaskFrame& frame) {
  std::vector<std::set<GaussianId>> out(frame.masks.size());
  for (size_t k = 0; k < frame.masks.size(); ++k) {
    for (const auto& hit : in_mask(scene, frame, static_cast<int>(k))) {
      out[k].insert(hit.id);
    }
  }
  return out;
}

double shared_overlap(const MotionGroup& bank_group,
                      const std::set<GaussianId>& new_set) {
  if (new_set.empty()) {
    throw DimensionError("shared_overlap: empty new set");
  }
  size_t inter = 0;
  for (GaussianId id : new_set) inter += bank_group.member_ids.count(id);
  return static_cast<double>(inter) / static_cast<double>(new_set.size());
}

MemoryBank group_naive4d(const DynamicScene& scene,
                         const std::vector<synth::MaskFrame>& masks,
                         const GroupingParams& params) {
  params.validate();
  if (masks.empty()) throw ConfigError("group_naive4d: no mask frames");
  MemoryBank bank;
  const auto init_sets = associate_by_projection(scene, masks.front());
  bank.groups.resize(init_sets.size());
  for (size_t k = 0; k < init_sets.size(); ++k) {
    bank.groups[k].tau = masks.front().tau_mask[k];
    merge_without_stealing(bank, static_cast<int>(k), init_sets[k]);
  }
  for (size_t f = 1; f < masks.size(); ++f) {
    const auto sets = associate_by_projection(scene, masks[f]);
    for (size_t k = 0; k < sets.size() && k < bank.groups.size(); ++k) {
      if (sets[k].empty()) continue;
      if (shared_overlap(bank.groups[k], sets[k]) >= params.overlap_threshold) {
        merge_without_stealing(bank, static_cast<int>(k), sets[k]);
      }
    }
  }
  bank.check_disjoint();
  return bank;
}

FeatureMatrix compute_features(const DynamicScene& scene,
                               const GroupingParams& params) {
  const int n = static_cast<int>(scene.gaussians.size());
  const int b = scene.motion.num_bases();
  Eigen::MatrixXd w(n, b);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < b; ++j) w(i, j) = scene.gaussians[i].weights[j];
  }
  const Eigen::RowVectorXd mean = w.colwise().mean();
  const Eigen::MatrixXd centered = w.rowwise() - mean;
  const Eigen::MatrixXd cov =
      centered.transpose() * centered / std::max(1, n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  // Eigen sorts ascending; take the top pca_dims in descending order.
  const int d = std::min(params.pca_dims, b);
  Eigen::MatrixXd components(b, d);
  Eigen::VectorXd eigenvalues(d);
  for (int c = 0; c < d; ++c) {
    components.col(c) = eig.eigenvectors().col(b - 1 - c);
    eigenvalues(c) = eig.eigenvalues()(b - 1 - c);
  }
  const double rank_floor = 1e-12 * std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
  for (int c = 0; c < d; ++c) {
    if (eigenvalues(c) <= rank_floor) {
      components.col(c).setZero();  // degenerate directions project to zero
      continue;
    }
    // Deterministic sign: largest-|loading| entry positive.
    int arg = 0;
    components.col(c).cwiseAbs().maxCoeff(&arg);
    if (components(arg, c) < 0) components.col(c) = -components.col(c);
  }
  FeatureMatrix features(n, 3 + d);
  for (int i = 0; i < n; ++i) {
    features.block<1, 3>(i, 0) = scene.gaussians[i].mean_c.transpose();
  }
  features.block(0, 3, n, d) = params.pca_scale * (centered * components);
  if (!features.allFinite()) {
    throw NumericalError("compute_features: non-finite feature");
  }
  return features;
}

double adaptive_radius(const FeatureMatrix& features,
                       const std::vector<int>& rows, int knn_k, double alpha) {
  if (rows.size() < 2) {
    return alpha * global_mean_nn_distance(features);
  }
  double total = 0.0;
  for (int i : rows) {
    std::vector<double> dists;
    dists.reserve(rows.size() - 1);
    for (int j : rows) {
      if (j == i) continue;
      dists.push_back((features.row(i) - features.row(j)).norm());
    }
    const size_t k = std::min<size_t>(knn_k, dists.size());
    std::partial_sort(dists.begin(), dists.begin() + k, dists.end());
    double mean_k = 0.0;
    for (size_t m = 0; m < k; ++m) mean_k += dists[m];
    total += mean_k / static_cast<double>(k);
  }
  return alpha * total / static_cast<double>(rows.size());
}

void region_grow(MemoryBank& bank, const DynamicScene& scene,
                 const FeatureMatrix& features, const GroupingParams& params) {
  if (bank.groups.empty()) throw ConfigError("region_grow: empty bank");
  const size_t max_sweeps = scene.gaussians.size() + 1;
  for (size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    bool changed = false;
    std::set<GaussianId> assigned = bank.assigned_ids();
    for (size_t k = 0; k < bank.groups.size(); ++k) {
      auto rows = member_rows(scene, bank.groups[k]);
      if (rows.empty()) continue;
      const double eps = adaptive_radius(features, rows, params.knn_k,
                                         params.radius_multiplier);
      for (size_t i = 0; i < scene.gaussians.size(); ++i) {
        const GaussianId id = scene.gaussians[i].id;
        if (assigned.count(id)) continue;
        double best = std::numeric_limits<double>::infinity();
        for (int j : rows) {
          best = std::min(best,
                          (features.row(static_cast<int>(i)) - features.row(j)).norm());
        }
        if (best < eps) {
          bank.groups[k].member_ids.insert(id);
          assigned.insert(id);
          rows.push_back(static_cast<int>(i));
          changed = true;
        }
      }
    }
    if (!changed) break;
  }
  bank.check_disjoint();
}

void knn_vote_reassign(MemoryBank& bank, const DynamicScene& scene,
                       const FeatureMatrix& features, int vote_k,
                       double reassign_fraction) {
  std::set<GaussianId> assigned = bank.assigned_ids();
  if (assigned.empty()) {
    throw ConfigError("knn_vote_reassign: no labeled gaussians");
  }
  if (reassign_fraction <= 0.0) return;

  struct Labeled {
    int row;
    int group;
  };
  std::vector<Labeled> labeled;
  std::vector<int> unassigned_rows;
  for (size_t i = 0; i < scene.gaussians.size(); ++i) {
    const int g = bank.group_of(scene.gaussians[i].id);
    if (g >= 0) {
      labeled.push_back({static_cast<int>(i), g});
    } else {
      unassigned_rows.push_back(static_cast<int>(i));
    }
  }
  if (unassigned_rows.empty()) return;

  struct Candidate {
    int row;
    int group;
    double mean_dist;
  };
  std::vector<Candidate> candidates;
  for (int row : unassigned_rows) {
    std::vector<std::pair<double, int>> dists;  // (distance, labeled index)
    dists.reserve(labeled.size());
    for (size_t l = 0; l < labeled.size(); ++l) {
      dists.emplace_back((features.row(row) - features.row(labeled[l].row)).norm(),
                         static_cast<int>(l));
    }
    const size_t k = std::min<size_t>(vote_k, dists.size());
    std::partial_sort(dists.begin(), dists.begin() + k, dists.end());
    std::vector<int> votes(bank.groups.size(), 0);
    double mean_dist = 0.0;
    for (size_t m = 0; m < k; ++m) {
      votes[labeled[dists[m].second].group]++;
      mean_dist += dists[m].first;
    }
    mean_dist /= static_cast<double>(k);
    int best_group = 0;
    int best_votes = -1;
    bool tie = false;
    for (size_t g = 0; g < votes.size(); ++g) {
      if (votes[g] > best_votes) {
        best_votes = votes[g];
        best_group = static_cast<int>(g);
        tie = false;
      } else if (votes[g] == best_votes) {
        tie = true;
      }
    }
    if (tie) best_group = labeled[dists[0].second].group;  // nearest neighbor
    candidates.push_back({row, best_group, mean_dist});
  }
  std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
    return a.mean_dist != b.mean_dist ? a.mean_dist < b.mean_dist
                                      : a.row < b.row;
  });
  const size_t commit = std::min(
      candidates.size(),
      static_cast<size_t>(std::ceil(reassign_fraction * candidates.size())));
  for (size_t i = 0; i < commit; ++i) {
    bank.groups[candidates[i].group].member_ids.insert(
        scene.gaussians[candidates[i].row].id);
  }
  bank.check_disjoint();
}

MemoryBank group_scene(const DynamicScene& scene,
                       const std::vector<synth::MaskFrame>& masks,
                       const GroupingParams& params) {
  params.validate();
  if (masks.empty()) throw ConfigError("group_scene: no mask frames");

  // Stage 1: seed at the first keyframe.
  MemoryBank bank;
  bank.groups.resize(masks.front().masks.size());
  for (size_t k = 0; k < bank.groups.size(); ++k) {
    bank.groups[k].tau = masks.front().tau_mask[k];
    merge_without_stealing(
        bank, static_cast<int>(k),
        select_front_gaussians(scene, masks.front(), static_cast<int>(k),
                               params.front_fraction));
  }
  const FeatureMatrix features = compute_features(scene, params);

  // Stage 2: alternate region growing and keyframe seeding in stride order.
  for (size_t f = 0; f < masks.size(); f += params.keyframe_stride) {
    region_grow(bank, scene, features, params);
    if (f == 0) continue;  // frame 0 seeds were consumed by stage 1
    for (size_t k = 0; k < bank.groups.size(); ++k) {
      auto seeds = select_front_gaussians(scene, masks[f], static_cast<int>(k),
                                          params.front_fraction);
      if (seeds.empty()) continue;
      if (params.gate_keyframe_merge &&
          shared_overlap(bank.groups[k], seeds) < params.overlap_threshold) {
        continue;
      }
      merge_without_stealing(bank, static_cast<int>(k), seeds);
    }
  }
  region_grow(bank, scene, features, params);

  // Stage 3: mop up by KNN vote.
  knn_vote_reassign(bank, scene, features, params.vote_k,
                    params.reassign_fraction);
  bank.check_disjoint();
  return bank;
}

double label_accuracy(const MemoryBank& bank, const DynamicScene& scene,
                      const synth::GroundTruth& gt) {
  if (scene.gaussians.empty()) return 0.0;
  size_t correct = 0;
  for (const auto& g : scene.gaussians) {
    if (bank.group_of(g.id) == gt.labels.at(g.id)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(scene.gaussians.size());
}

}  // namespace mogaf::grouping
