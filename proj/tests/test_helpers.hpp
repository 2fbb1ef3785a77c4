#pragma once

// Shared builders for randomized test scenes.

#include <vector>

#include "core/rng.hpp"
#include "core/scene.hpp"

namespace mogaf::testutil {

inline Quat random_quat(Rng& rng, double max_angle = 3.0) {
  return Quat::from_axis_angle(rng.unit_vec3(), rng.uniform(-max_angle, max_angle))
      .canonical();
}

inline std::vector<double> random_simplex(Rng& rng, int b) {
  std::vector<double> w(b);
  double sum = 0.0;
  for (double& v : w) {
    v = rng.uniform(1e-3, 1.0);
    sum += v;
  }
  for (double& v : w) v /= sum;
  return w;
}

inline Camera default_camera(int width = 128, int height = 128,
                             double focal = 120.0) {
  Camera cam;
  cam.intrinsics << focal, 0, width / 2.0, 0, focal, height / 2.0, 0, 0, 1;
  cam.extrinsics.translation = {0, 0, 6.0};  // world origin 6 units ahead
  cam.width = width;
  cam.height = height;
  return cam;
}

// Random valid scene: n gaussians, b bases, t timesteps, smooth-ish motion.
inline DynamicScene random_scene(Rng& rng, int n, int b, int t,
                                 double motion_scale = 0.5) {
  DynamicScene scene;
  scene.motion.bases.resize(b);
  for (int bi = 0; bi < b; ++bi) {
    SE3Transform step;
    step.rotation = Quat::from_axis_angle(rng.unit_vec3(),
                                          rng.uniform(-0.2, 0.2) * motion_scale);
    step.translation = rng.vec3_normal(0.1 * motion_scale);
    SE3Transform current;
    for (int ti = 0; ti < t; ++ti) {
      scene.motion.bases[bi].push_back(current);
      current = step.compose(current);
      current.rotation = current.rotation.canonical();
    }
  }
  for (int i = 0; i < n; ++i) {
    GaussianCanonical g;
    g.id = i;
    g.mean_c = rng.vec3_normal(1.0);
    g.rot_c = random_quat(rng);
    g.weights = random_simplex(rng, b);
    scene.gaussians.push_back(std::move(g));
  }
  scene.cameras.assign(t, default_camera());
  scene.validate();
  return scene;
}

}  // namespace mogaf::testutil
