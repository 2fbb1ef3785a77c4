#include <cmath>

#include "core/errors.hpp"
#include "core/scene.hpp"
#include "doctest.h"
#include "io/serialize.hpp"
#include "test_helpers.hpp"

using namespace mogaf;

namespace {

DynamicScene single_basis_scene(const SE3Transform& tf, int t_count = 3) {
  DynamicScene scene;
  scene.motion.bases.push_back(std::vector<SE3Transform>(t_count, tf));
  GaussianCanonical g;
  g.id = 0;
  g.weights = {1.0};
  scene.gaussians.push_back(g);
  scene.cameras.assign(t_count, testutil::default_camera());
  return scene;
}

}  // namespace

TEST_CASE("deform_gaussian") {
  SUBCASE("identity basis leaves the gaussian in place") {
    DynamicScene scene = single_basis_scene(SE3Transform::identity());
    scene.gaussians[0].mean_c = {1, 2, 3};
    scene.gaussians[0].rot_c = Quat::from_axis_angle({0, 0, 1}, 0.7);
    const DeformedState d = deform_gaussian(scene.gaussians[0], scene.motion, 1);
    CHECK((d.mean - Eigen::Vector3d(1, 2, 3)).norm() < 1e-15);
    CHECK(quat_angle(d.rot, scene.gaussians[0].rot_c) < 1e-12);
  }
  SUBCASE("pure translation moves the origin") {
    SE3Transform tf;
    tf.translation = {1, 2, 3};
    DynamicScene scene = single_basis_scene(tf);
    const DeformedState d = deform_gaussian(scene.gaussians[0], scene.motion, 0);
    CHECK((d.mean - Eigen::Vector3d(1, 2, 3)).norm() < 1e-15);
  }
  SUBCASE("quarter turn about z") {
    SE3Transform tf;
    tf.rotation = Quat::from_axis_angle({0, 0, 1}, M_PI / 2.0);
    DynamicScene scene = single_basis_scene(tf);
    scene.gaussians[0].mean_c = {1, 0, 0};
    const DeformedState d = deform_gaussian(scene.gaussians[0], scene.motion, 0);
    CHECK((d.mean - Eigen::Vector3d(0, 1, 0)).norm() < 1e-9);
  }
  SUBCASE("timestep out of range") {
    DynamicScene scene = single_basis_scene(SE3Transform::identity());
    CHECK_THROWS_AS(deform_gaussian(scene.gaussians[0], scene.motion, 3),
                    ConfigError);
    CHECK_THROWS_AS(deform_gaussian(scene.gaussians[0], scene.motion, -1),
                    ConfigError);
  }
}

TEST_CASE("project_mean") {
  Camera cam;
  cam.width = 100;
  cam.height = 80;
  SUBCASE("optical axis maps to the principal point") {
    cam.intrinsics << 50, 0, 30, 0, 50, 40, 0, 0, 1;
    const Projection p = project_mean({0, 0, 1}, cam);
    CHECK(p.u == doctest::Approx(30.0));
    CHECK(p.v == doctest::Approx(40.0));
    CHECK(p.depth == doctest::Approx(1.0));
  }
  SUBCASE("hand perspective division") {
    cam.intrinsics << 100, 0, 0, 0, 100, 0, 0, 0, 1;
    const Projection p = project_mean({1, 0, 2}, cam);
    CHECK(p.u == doctest::Approx(50.0));
    CHECK(p.v == doctest::Approx(0.0));
    CHECK(p.depth == doctest::Approx(2.0));
  }
  SUBCASE("point behind the camera") {
    cam.intrinsics << 50, 0, 30, 0, 50, 40, 0, 0, 1;
    CHECK_THROWS_AS(project_mean({0, 0, -1}, cam), BehindCameraError);
    CHECK_THROWS_AS(project_mean({0, 0, 0}, cam), BehindCameraError);
  }
  SUBCASE("doubling depth halves the offset from the principal point") {
    cam.intrinsics << 70, 0, 25, 0, 70, 35, 0, 0, 1;
    Rng rng(5);
    for (int i = 0; i < 100; ++i) {
      const Eigen::Vector3d p{rng.uniform(-1, 1), rng.uniform(-1, 1),
                              rng.uniform(0.5, 4.0)};
      const Projection a = project_mean(p, cam);
      const Projection b = project_mean({p.x(), p.y(), 2.0 * p.z()}, cam);
      CHECK(std::abs((b.u - 25.0) - 0.5 * (a.u - 25.0)) < 1e-9);
      CHECK(std::abs((b.v - 35.0) - 0.5 * (a.v - 35.0)) < 1e-9);
    }
  }
}

TEST_CASE("scene validation") {
  Rng rng(7);
  DynamicScene scene = testutil::random_scene(rng, 4, 2, 3);
  SUBCASE("valid scene passes") { CHECK_NOTHROW(scene.validate()); }
  SUBCASE("weights must sum to one") {
    scene.gaussians[0].weights = {0.5, 0.6};
    CHECK_THROWS_AS(scene.validate(), ConfigError);
  }
  SUBCASE("weights must be nonnegative") {
    scene.gaussians[0].weights = {1.2, -0.2};
    CHECK_THROWS_AS(scene.validate(), ConfigError);
  }
  SUBCASE("duplicate ids rejected") {
    scene.gaussians[1].id = scene.gaussians[0].id;
    CHECK_THROWS_AS(scene.validate(), ConfigError);
  }
  SUBCASE("camera count must match timesteps") {
    scene.cameras.pop_back();
    CHECK_THROWS_AS(scene.validate(), ConfigError);
  }
  SUBCASE("weight length must match basis count") {
    scene.gaussians[2].weights = {1.0};
    CHECK_THROWS_AS(scene.validate(), ConfigError);
  }
}

TEST_CASE("scene_trajectories") {
  SUBCASE("static scene rows are constant") {
    DynamicScene scene = single_basis_scene(SE3Transform::identity(), 4);
    scene.gaussians[0].mean_c = {0.5, -1, 2};
    const TrajectoryTensor traj = scene_trajectories(scene);
    REQUIRE(traj.length() == 4);
    for (int t = 1; t < 4; ++t) {
      for (int c = 0; c < 7; ++c) {
        CHECK(traj.values[0][t][c] == doctest::Approx(traj.values[0][0][c]));
      }
    }
  }
  SUBCASE("translation basis changes only the mean") {
    DynamicScene scene;
    SE3Transform t0, t1;
    t1.translation = {1, 0, 0};
    scene.motion.bases.push_back({t0, t1});
    GaussianCanonical g;
    g.id = 3;
    g.weights = {1.0};
    g.rot_c = Quat::from_axis_angle({1, 0, 0}, 0.4);
    scene.gaussians.push_back(g);
    scene.cameras.assign(2, testutil::default_camera());
    const TrajectoryTensor traj = scene_trajectories(scene);
    CHECK(traj.values[0][1][0] - traj.values[0][0][0] == doctest::Approx(1.0));
    for (int c = 3; c < 7; ++c) {
      CHECK(traj.values[0][1][c] == doctest::Approx(traj.values[0][0][c]));
    }
  }
  SUBCASE("quaternion outputs are canonical unit") {
    Rng rng(9);
    const DynamicScene scene = testutil::random_scene(rng, 10, 3, 5);
    const TrajectoryTensor traj = scene_trajectories(scene);
    for (const auto& seq : traj.values) {
      for (const auto& v : seq) {
        const Quat q = TrajectoryTensor::quat_of(v);
        CHECK(std::abs(q.norm() - 1.0) < 1e-6);
        CHECK(q.w >= 0.0);
      }
    }
  }
  SUBCASE("serialization round trip preserves trajectories") {
    Rng rng(10);
    const DynamicScene scene = testutil::random_scene(rng, 6, 2, 4);
    const DynamicScene rebuilt = io::scene_from_json(io::scene_to_json(scene));
    const TrajectoryTensor a = scene_trajectories(scene);
    const TrajectoryTensor b = scene_trajectories(rebuilt);
    for (size_t i = 0; i < a.values.size(); ++i) {
      for (int t = 0; t < a.length(); ++t) {
        for (int c = 0; c < 7; ++c) {
          CHECK(std::abs(a.values[i][t][c] - b.values[i][t][c]) < 1e-12);
        }
      }
    }
  }
}

TEST_CASE("rigid consistency of shared-weight scenes") {
  // Identical weights mean every gaussian undergoes the same SE(3) motion,
  // which preserves pairwise distances.
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    DynamicScene scene = testutil::random_scene(rng, 6, 3, 4);
    const std::vector<double> shared = testutil::random_simplex(rng, 3);
    for (auto& g : scene.gaussians) g.weights = shared;
    std::vector<std::vector<Eigen::Vector3d>> means(scene.num_timesteps());
    for (int t = 0; t < scene.num_timesteps(); ++t) {
      for (const auto& g : scene.gaussians) {
        means[t].push_back(deform_gaussian(g, scene.motion, t).mean);
      }
    }
    for (size_t i = 0; i < scene.gaussians.size(); ++i) {
      for (size_t j = i + 1; j < scene.gaussians.size(); ++j) {
        const double d0 = (means[0][i] - means[0][j]).norm();
        for (int t = 1; t < scene.num_timesteps(); ++t) {
          CHECK(std::abs((means[t][i] - means[t][j]).norm() - d0) < 1e-9);
        }
      }
    }
  }
}

TEST_CASE("scene_prefix truncates bases and cameras") {
  Rng rng(12);
  const DynamicScene scene = testutil::random_scene(rng, 4, 2, 6);
  const DynamicScene prefix = scene_prefix(scene, 4);
  CHECK(prefix.num_timesteps() == 4);
  CHECK(prefix.cameras.size() == 4);
  CHECK(prefix.gaussians.size() == scene.gaussians.size());
  const TrajectoryTensor a = scene_trajectories(scene);
  const TrajectoryTensor b = scene_trajectories(prefix);
  for (size_t i = 0; i < a.values.size(); ++i) {
    for (int t = 0; t < 4; ++t) {
      for (int c = 0; c < 7; ++c) {
        CHECK(a.values[i][t][c] == doctest::Approx(b.values[i][t][c]));
      }
    }
  }
  CHECK_THROWS_AS(scene_prefix(scene, 7), ConfigError);
}
