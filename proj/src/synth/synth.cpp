#include "synth/synth.hpp"

#include <cmath>
#include <limits>

#include "core/errors.hpp"
#include "core/rng.hpp"

namespace mogaf::synth {

namespace {

// Weight fraction routed to the jitter bases when noise_sigma > 0. The jitter
// pair (+d, -d) keeps the blended rotation common to the whole group, so the
// per-Gaussian deviation is pure translation jitter with std ~ noise_sigma.
constexpr double kJitterWeight = 0.1;

Camera make_orbit_camera(const SynthConfig& cfg, double frac) {
  const double theta = -0.5 * cfg.orbit_arc + cfg.orbit_arc * frac;
  const Eigen::Vector3d pos(cfg.orbit_radius * std::sin(theta),
                            cfg.orbit_height,
                            -cfg.orbit_radius * std::cos(theta));
  // Look-at origin; world->camera with +z forward.
  const Eigen::Vector3d fwd = (-pos).normalized();
  Eigen::Vector3d up(0, 1, 0);
  Eigen::Vector3d right = up.cross(fwd).normalized();
  up = fwd.cross(right).normalized();
  Eigen::Matrix3d r_wc;
  r_wc.row(0) = right.transpose();
  r_wc.row(1) = up.transpose();
  r_wc.row(2) = fwd.transpose();

  Camera cam;
  cam.width = cfg.image_width;
  cam.height = cfg.image_height;
  cam.intrinsics << cfg.focal, 0, cfg.image_width / 2.0,
                    0, cfg.focal, cfg.image_height / 2.0,
                    0, 0, 1;
  cam.extrinsics.rotation = Quat::from_matrix(r_wc);
  cam.extrinsics.translation = -(cam.extrinsics.rotation.rotate(pos));
  return cam;
}

// Constant-velocity SE(3) trajectory rotating about `center` while
// translating, with total angle/translation bounded by the amplitude.
std::vector<SE3Transform> smooth_trajectory(const Eigen::Vector3d& center,
                                            const Eigen::Vector3d& axis,
                                            double total_angle,
                                            const Eigen::Vector3d& total_trans,
                                            int t_count) {
  std::vector<SE3Transform> traj(t_count);
  for (int t = 0; t < t_count; ++t) {
    const double frac = static_cast<double>(t) / (t_count - 1);
    SE3Transform tf;
    tf.rotation = Quat::exp_map(axis * (total_angle * frac)).canonical();
    tf.translation = center - tf.rotation.rotate(center) + total_trans * frac;
    traj[t] = tf;
  }
  return traj;
}

}  // namespace

void SynthConfig::validate() const {
  if (group_kinds.empty()) throw ConfigError("SynthConfig: K >= 1 required");
  if (num_timesteps < 4) throw ConfigError("SynthConfig: T >= 4 required");
  if (noise_sigma < 0) throw ConfigError("SynthConfig: noise sigma >= 0");
  if (gaussians_per_group < 1) throw ConfigError("SynthConfig: empty groups");
  if (nonrigid_bases_per_group < 2) {
    throw ConfigError("SynthConfig: non-rigid groups need >= 2 bases");
  }
}

std::pair<DynamicScene, GroundTruth> generate_scene(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const int num_groups = cfg.num_groups();
  const int t_count = cfg.num_timesteps;
  const bool noisy = cfg.noise_sigma > 0.0;

  DynamicScene scene;
  GroundTruth gt;
  gt.tau.resize(num_groups);
  gt.rigid_trajectories.resize(num_groups);

  // Group centers: spread along x, or stacked along the first camera's
  // viewing axis for the occlusion-stress layout.
  const Camera cam0 = make_orbit_camera(cfg, 0.0);
  std::vector<Eigen::Vector3d> centers(num_groups);
  for (int k = 0; k < num_groups; ++k) {
    const double offset = (k - 0.5 * (num_groups - 1)) * cfg.group_separation;
    if (cfg.depth_aligned_layout) {
      const Eigen::Vector3d cam_pos =
          cam0.extrinsics.inverse().translation;
      const Eigen::Vector3d view_dir = (-cam_pos).normalized();
      centers[k] = view_dir * offset;
    } else {
      centers[k] = Eigen::Vector3d(offset, 0, 0);
    }
  }

  // First lay out all basis trajectories so the total count B is known.
  std::vector<std::vector<int>> group_bases(num_groups);   // motion bases
  std::vector<std::array<int, 2>> jitter_bases(num_groups, {-1, -1});
  MotionBasisSet motion;

  for (int k = 0; k < num_groups; ++k) {
    Rng grng = rng.fork(static_cast<uint64_t>(k));
    const bool rigid = cfg.group_kinds[k] == GroupKind::kRigid;
    gt.tau[k] = rigid ? 1 : 0;
    const int nb = rigid ? 1 : cfg.nonrigid_bases_per_group;
    for (int b = 0; b < nb; ++b) {
      const Eigen::Vector3d axis = grng.unit_vec3();
      const double angle_scale = rigid ? 0.6 : 0.4;
      const double total_angle =
          cfg.motion_amplitude * angle_scale * grng.uniform(0.5, 1.0);
      const Eigen::Vector3d total_trans =
          grng.unit_vec3() * cfg.motion_amplitude * 0.8 * grng.uniform(0.5, 1.0);
      auto traj = smooth_trajectory(centers[k], axis, total_angle, total_trans,
                                    t_count);
      if (rigid) gt.rigid_trajectories[k] = traj;
      group_bases[k].push_back(motion.num_bases());
      motion.bases.push_back(std::move(traj));
    }
  }
  if (noisy) {
    // One +/- jitter pair per group, iid translations per timestep.
    const double sigma_d = cfg.noise_sigma * std::sqrt(3.0) / (2.0 * kJitterWeight);
    for (int k = 0; k < num_groups; ++k) {
      Rng jrng = rng.fork(1000 + static_cast<uint64_t>(k));
      std::vector<SE3Transform> plus(t_count), minus(t_count);
      for (int t = 0; t < t_count; ++t) {
        const Eigen::Vector3d d = jrng.vec3_normal(sigma_d);
        plus[t].translation = d;
        minus[t].translation = -d;
      }
      jitter_bases[k][0] = motion.num_bases();
      motion.bases.push_back(std::move(plus));
      jitter_bases[k][1] = motion.num_bases();
      motion.bases.push_back(std::move(minus));
    }
  }
  const int num_bases = motion.num_bases();
  scene.motion = std::move(motion);

  // Gaussians: sampled in a ball around each group center; non-rigid blend
  // weights are a softmax of negative squared distance to anchor points.
  GaussianId next_id = 0;
  for (int k = 0; k < num_groups; ++k) {
    Rng grng = rng.fork(2000 + static_cast<uint64_t>(k));
    const bool rigid = cfg.group_kinds[k] == GroupKind::kRigid;
    std::vector<Eigen::Vector3d> anchors;
    for (int b : group_bases[k]) {
      (void)b;
      anchors.push_back(centers[k] +
                        grng.unit_vec3() * cfg.object_scale * grng.uniform(0.4, 1.0));
    }
    for (int i = 0; i < cfg.gaussians_per_group; ++i) {
      GaussianCanonical g;
      g.id = next_id++;
      g.mean_c = centers[k] + grng.unit_vec3() *
                                  cfg.object_scale * std::cbrt(grng.uniform());
      g.rot_c = Quat::exp_map(grng.unit_vec3() * grng.uniform(0.0, 0.5)).canonical();
      g.weights.assign(num_bases, 0.0);
      if (rigid) {
        g.weights[group_bases[k][0]] = 1.0;
      } else {
        double denom = 0.0;
        std::vector<double> sw(anchors.size());
        for (size_t b = 0; b < anchors.size(); ++b) {
          const double d2 = (g.mean_c - anchors[b]).squaredNorm();
          sw[b] = std::exp(-d2 / (cfg.object_scale * cfg.object_scale));
          denom += sw[b];
        }
        for (size_t b = 0; b < anchors.size(); ++b) {
          g.weights[group_bases[k][b]] = sw[b] / denom;
        }
      }
      if (noisy) {
        const double delta = grng.uniform(-1.0, 1.0);
        for (double& w : g.weights) w *= 1.0 - 2.0 * kJitterWeight;
        g.weights[jitter_bases[k][0]] = kJitterWeight * (1.0 + delta);
        g.weights[jitter_bases[k][1]] = kJitterWeight * (1.0 - delta);
      }
      gt.labels[g.id] = k;
      scene.gaussians.push_back(std::move(g));
    }
  }

  scene.cameras.resize(t_count);
  for (int t = 0; t < t_count; ++t) {
    scene.cameras[t] =
        make_orbit_camera(cfg, static_cast<double>(t) / (t_count - 1));
  }
  scene.validate();

  gt.occlusion = occlusion_flags(scene, gt, cfg.splat_radius);
  return {std::move(scene), std::move(gt)};
}

MaskFrame rasterize_masks(const DynamicScene& scene, const GroundTruth& gt,
                          int t, int splat_radius) {
  if (t < 0 || t >= scene.num_timesteps()) {
    throw ConfigError("rasterize_masks: timestep out of range");
  }
  const Camera& cam = scene.cameras.at(t);
  const int w = cam.width, h = cam.height;
  MaskFrame frame;
  frame.t = t;
  frame.width = w;
  frame.height = h;
  frame.masks.assign(gt.num_groups(), std::vector<uint8_t>(static_cast<size_t>(w) * h, 0));
  frame.tau_mask = gt.tau;

  std::vector<double> zbuf(static_cast<size_t>(w) * h,
                           std::numeric_limits<double>::infinity());
  std::vector<int> owner_group(static_cast<size_t>(w) * h, -1);

  struct Splat {
    int cx, cy, group;
    double depth;
    bool onscreen;
  };
  std::vector<Splat> splats(scene.gaussians.size());

  for (size_t i = 0; i < scene.gaussians.size(); ++i) {
    const auto& g = scene.gaussians[i];
    Splat s{0, 0, gt.labels.at(g.id), 0.0, false};
    try {
      const DeformedState d = deform_gaussian(g, scene.motion, t);
      const Projection p = project_mean(d.mean, cam);
      s.cx = static_cast<int>(std::floor(p.u));
      s.cy = static_cast<int>(std::floor(p.v));
      s.depth = p.depth;
      s.onscreen = s.cx >= 0 && s.cx < w && s.cy >= 0 && s.cy < h;
    } catch (const BehindCameraError&) {
      s.onscreen = false;
    }
    splats[i] = s;
    if (!s.onscreen) continue;
    const int r = splat_radius;
    for (int dy = -r; dy <= r; ++dy) {
      for (int dx = -r; dx <= r; ++dx) {
        if (dx * dx + dy * dy > r * r) continue;
        const int px = s.cx + dx, py = s.cy + dy;
        if (px < 0 || px >= w || py < 0 || py >= h) continue;
        const size_t idx = static_cast<size_t>(py) * w + px;
        if (s.depth < zbuf[idx]) {
          zbuf[idx] = s.depth;
          owner_group[idx] = s.group;
        }
      }
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const size_t idx = static_cast<size_t>(y) * w + x;
      if (owner_group[idx] >= 0) frame.masks[owner_group[idx]][idx] = 255;
    }
  }
  return frame;
}

std::vector<std::vector<uint8_t>> occlusion_flags(const DynamicScene& scene,
                                                  const GroundTruth& gt,
                                                  int splat_radius) {
  const int t_count = scene.num_timesteps();
  const int n = static_cast<int>(scene.gaussians.size());
  std::vector<std::vector<uint8_t>> occ(n, std::vector<uint8_t>(t_count, 0));
  for (int t = 0; t < t_count; ++t) {
    const Camera& cam = scene.cameras.at(t);
    const int w = cam.width, h = cam.height;
    std::vector<double> zbuf(static_cast<size_t>(w) * h,
                             std::numeric_limits<double>::infinity());
    struct Center { int cx = 0, cy = 0; double depth = 0.0; bool onscreen = false; };
    std::vector<Center> centers(n);
    for (int i = 0; i < n; ++i) {
      try {
        const DeformedState d = deform_gaussian(scene.gaussians[i], scene.motion, t);
        const Projection p = project_mean(d.mean, cam);
        Center c;
        c.cx = static_cast<int>(std::floor(p.u));
        c.cy = static_cast<int>(std::floor(p.v));
        c.depth = p.depth;
        c.onscreen = c.cx >= 0 && c.cx < w && c.cy >= 0 && c.cy < h;
        centers[i] = c;
      } catch (const BehindCameraError&) {
        centers[i].onscreen = false;
      }
      if (!centers[i].onscreen) continue;
      const int r = splat_radius;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          if (dx * dx + dy * dy > r * r) continue;
          const int px = centers[i].cx + dx, py = centers[i].cy + dy;
          if (px < 0 || px >= w || py < 0 || py >= h) continue;
          const size_t idx = static_cast<size_t>(py) * w + px;
          zbuf[idx] = std::min(zbuf[idx], centers[i].depth);
        }
      }
    }
    for (int i = 0; i < n; ++i) {
      const Center& c = centers[i];
      if (!c.onscreen) {
        occ[i][t] = 1;
        continue;
      }
      const size_t idx = static_cast<size_t>(c.cy) * w + c.cx;
      occ[i][t] = c.depth <= zbuf[idx] + 1e-9 ? 0 : 1;
    }
  }
  return occ;
}

SynthConfig preset_config(const std::string& name, uint64_t seed) {
  SynthConfig cfg;
  cfg.seed = seed;
  if (name == "two-groups") {
    cfg.group_kinds = {GroupKind::kRigid, GroupKind::kNonRigid};
    cfg.gaussians_per_group = 50;
    cfg.num_timesteps = 24;
    cfg.group_separation = 4.0;
    cfg.motion_amplitude = 1.0;
    cfg.noise_sigma = 0.0;
  } else if (name == "rigid-nonrigid-mix") {
    cfg.group_kinds = {GroupKind::kRigid, GroupKind::kRigid,
                       GroupKind::kNonRigid};
    cfg.gaussians_per_group = 24;
    cfg.num_timesteps = 40;
    cfg.group_separation = 3.0;
    cfg.motion_amplitude = 1.2;
    cfg.noise_sigma = 0.004;
  } else if (name == "occlusion-stress") {
    cfg.group_kinds = {GroupKind::kRigid, GroupKind::kRigid};
    cfg.gaussians_per_group = 50;
    cfg.num_timesteps = 24;
    cfg.group_separation = 2.0;
    cfg.motion_amplitude = 0.8;
    cfg.noise_sigma = 0.0;
    cfg.depth_aligned_layout = true;
    cfg.orbit_arc = 0.8;
  } else {
    throw ConfigError("unknown preset: " + name);
  }
  return cfg;
}

}  // namespace mogaf::synth
