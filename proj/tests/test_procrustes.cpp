#include <cmath>

#include "core/errors.hpp"
#include "doctest.h"
#include "rigidfit/procrustes.hpp"
#include "synth/synth.hpp"
#include "test_helpers.hpp"

using namespace mogaf;
using rigidfit::ProcrustesFit;

namespace {

std::vector<Eigen::Vector3d> random_points(Rng& rng, int n, double scale = 1.0) {
  std::vector<Eigen::Vector3d> pts(n);
  for (auto& p : pts) p = rng.vec3_normal(scale);
  return pts;
}

std::vector<Eigen::Vector3d> apply_all(const SE3Transform& tf,
                                       const std::vector<Eigen::Vector3d>& pts) {
  std::vector<Eigen::Vector3d> out(pts.size());
  for (size_t i = 0; i < pts.size(); ++i) out[i] = tf.apply(pts[i]);
  return out;
}

double squared_residual(const std::vector<Eigen::Vector3d>& source,
                        const std::vector<Eigen::Vector3d>& target,
                        const SE3Transform& tf) {
  double sq = 0.0;
  for (size_t i = 0; i < source.size(); ++i) {
    sq += (tf.apply(source[i]) - target[i]).squaredNorm();
  }
  return sq;
}

}  // namespace

TEST_CASE("fit_procrustes basics") {
  Rng rng(101);
  SUBCASE("identity on matching sets") {
    const auto pts = random_points(rng, 10);
    const ProcrustesFit fit = rigidfit::fit_procrustes(pts, pts);
    CHECK(quat_angle(fit.transform.rotation, Quat::identity()) < 1e-9);
    CHECK(fit.transform.translation.norm() < 1e-12);
    CHECK(fit.rms_residual < 1e-12);
  }
  SUBCASE("pure translation") {
    const auto pts = random_points(rng, 8);
    SE3Transform shift;
    shift.translation = {1, 2, 3};
    const ProcrustesFit fit =
        rigidfit::fit_procrustes(pts, apply_all(shift, pts));
    CHECK(quat_angle(fit.transform.rotation, Quat::identity()) < 1e-9);
    CHECK((fit.transform.translation - Eigen::Vector3d(1, 2, 3)).norm() < 1e-12);
    CHECK(fit.rms_residual < 1e-12);
  }
  SUBCASE("rotation about z plus offset") {
    const auto pts = random_points(rng, 10);
    SE3Transform tf;
    tf.rotation = Quat::from_axis_angle({0, 0, 1}, 30.0 * M_PI / 180.0);
    tf.translation = {0, 1, 0};
    const ProcrustesFit fit = rigidfit::fit_procrustes(pts, apply_all(tf, pts));
    CHECK(quat_angle(fit.transform.rotation, tf.rotation) < 1e-9);
    CHECK((fit.transform.translation - tf.translation).norm() < 1e-9);
    CHECK(fit.rms_residual < 1e-9);
  }
  SUBCASE("input validation") {
    const auto pts = random_points(rng, 5);
    CHECK_THROWS_AS(rigidfit::fit_procrustes(pts, random_points(rng, 4)),
                    DimensionError);
    CHECK_THROWS_AS(
        rigidfit::fit_procrustes({pts[0], pts[1]}, {pts[0], pts[1]}),
        DegenerateGeometryError);
    // Collinear points have a rank-1 centered covariance.
    std::vector<Eigen::Vector3d> line{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
    CHECK_THROWS_AS(rigidfit::fit_procrustes(line, line),
                    DegenerateGeometryError);
  }
}

TEST_CASE("fit_procrustes recovers 100 random transforms") {
  Rng rng(103);
  for (int trial = 0; trial < 100; ++trial) {
    const auto pts = random_points(rng, 10, 2.0);
    SE3Transform tf{testutil::random_quat(rng), rng.vec3_normal(2.0)};
    const ProcrustesFit fit = rigidfit::fit_procrustes(pts, apply_all(tf, pts));
    CHECK(quat_angle(fit.transform.rotation, tf.rotation) < 1e-9);
    CHECK((fit.transform.translation - tf.translation).norm() < 1e-9);
  }
}

TEST_CASE("fit_procrustes structural properties") {
  Rng rng(107);
  SUBCASE("left-invariance under a common pre-rotation") {
    for (int trial = 0; trial < 20; ++trial) {
      const auto src = random_points(rng, 12);
      SE3Transform tf{testutil::random_quat(rng), rng.vec3_normal()};
      auto dst = apply_all(tf, src);
      // Perturb so the fit is not exact (the property must hold regardless).
      for (auto& p : dst) p += rng.vec3_normal(0.05);
      const ProcrustesFit base = rigidfit::fit_procrustes(src, dst);

      const Quat q = testutil::random_quat(rng);
      SE3Transform pre{q, {0, 0, 0}};
      const ProcrustesFit rotated =
          rigidfit::fit_procrustes(apply_all(pre, src), apply_all(pre, dst));
      // Solution conjugates: R' = Q R Qt, t' = Q t.
      const Quat expected_rot = (q * base.transform.rotation * q.conjugate());
      CHECK(quat_angle(rotated.transform.rotation, expected_rot) < 1e-9);
      CHECK((rotated.transform.translation -
             q.rotate(base.transform.translation)).norm() < 1e-9);
      CHECK(rotated.rms_residual == doctest::Approx(base.rms_residual));
    }
  }
  SUBCASE("determinant stays +1 under reflective noise") {
    for (int trial = 0; trial < 50; ++trial) {
      auto src = random_points(rng, 6);
      // Reflected target tempts an improper solution.
      std::vector<Eigen::Vector3d> dst(src.size());
      for (size_t i = 0; i < src.size(); ++i) {
        dst[i] = Eigen::Vector3d(-src[i].x(), src[i].y(), src[i].z()) +
                 rng.vec3_normal(0.01);
      }
      const ProcrustesFit fit = rigidfit::fit_procrustes(src, dst);
      CHECK(fit.transform.rotation.to_matrix().determinant() ==
            doctest::Approx(1.0));
    }
  }
  SUBCASE("local optimality against 1000 random perturbations") {
    const auto src = random_points(rng, 15);
    SE3Transform tf{testutil::random_quat(rng), rng.vec3_normal()};
    auto dst = apply_all(tf, src);
    for (auto& p : dst) p += rng.vec3_normal(0.1);
    const ProcrustesFit fit = rigidfit::fit_procrustes(src, dst);
    const double best = squared_residual(src, dst, fit.transform);
    for (int i = 0; i < 1000; ++i) {
      SE3Transform candidate = fit.transform;
      candidate.rotation =
          (Quat::exp_map(rng.vec3_normal(0.05)) * candidate.rotation)
              .canonical();
      candidate.translation += rng.vec3_normal(0.05);
      CHECK(squared_residual(src, dst, candidate) >= best - 1e-12);
    }
  }
}

TEST_CASE("fit_translation") {
  Rng rng(109);
  const auto pts = random_points(rng, 2);
  SE3Transform shift;
  shift.translation = {0.5, -1, 2};
  const ProcrustesFit fit =
      rigidfit::fit_translation(pts, apply_all(shift, pts));
  CHECK((fit.transform.translation - shift.translation).norm() < 1e-12);
  CHECK(fit.rms_residual < 1e-12);
  CHECK_THROWS_AS(rigidfit::fit_translation({}, {}), DimensionError);
}

TEST_CASE("init_rigid_trajectories") {
  SUBCASE("noiseless rigid group recovers the generating transform") {
    const auto [scene, gt] =
        synth::generate_scene(synth::preset_config("two-groups", 211));
    REQUIRE(gt.tau[0] == 1);
    grouping::MotionGroup group;
    group.tau = 1;
    for (const auto& [id, label] : gt.labels) {
      if (label == 0) group.member_ids.insert(id);
    }
    const rigidfit::RigidTrajectory traj =
        rigidfit::init_rigid_trajectories(scene, group, 0);
    REQUIRE(traj.transforms.size() == gt.rigid_trajectories[0].size());
    for (size_t t = 0; t < traj.transforms.size(); ++t) {
      const auto& fitted = traj.transforms[t];
      const auto& truth = gt.rigid_trajectories[0][t];
      CHECK(quat_angle(fitted.rotation, truth.rotation) < 1e-9);
      CHECK((fitted.translation - truth.translation).norm() < 1e-9);
    }
  }
  SUBCASE("static scene yields identities") {
    synth::SynthConfig cfg;
    cfg.group_kinds = {synth::GroupKind::kRigid};
    cfg.gaussians_per_group = 10;
    cfg.num_timesteps = 5;
    cfg.motion_amplitude = 0.0;
    cfg.seed = 5;
    const auto [scene, gt] = synth::generate_scene(cfg);
    grouping::MotionGroup group;
    group.tau = 1;
    for (const auto& g : scene.gaussians) group.member_ids.insert(g.id);
    const rigidfit::RigidTrajectory traj =
        rigidfit::init_rigid_trajectories(scene, group, 0);
    for (const auto& tf : traj.transforms) {
      CHECK(quat_angle(tf.rotation, Quat::identity()) < 1e-9);
      CHECK(tf.translation.norm() < 1e-9);
    }
  }
  SUBCASE("noisy rigid group residual RMS bounded by 3 sigma") {
    const double sigma = 0.01;
    for (uint64_t seed = 0; seed < 20; ++seed) {
      synth::SynthConfig cfg;
      cfg.group_kinds = {synth::GroupKind::kRigid};
      cfg.gaussians_per_group = 40;
      cfg.num_timesteps = 8;
      cfg.noise_sigma = sigma;
      cfg.seed = seed;
      const auto [scene, gt] = synth::generate_scene(cfg);
      grouping::MotionGroup group;
      group.tau = 1;
      for (const auto& g : scene.gaussians) group.member_ids.insert(g.id);
      // Measure the per-point residual of the per-timestep fits directly.
      std::vector<Eigen::Vector3d> canonical;
      for (const auto& g : scene.gaussians) canonical.push_back(g.mean_c);
      double sq = 0.0;
      int count = 0;
      for (int t = 0; t < scene.num_timesteps(); ++t) {
        std::vector<Eigen::Vector3d> deformed;
        for (const auto& g : scene.gaussians) {
          deformed.push_back(deform_gaussian(g, scene.motion, t).mean);
        }
        const ProcrustesFit fit =
            rigidfit::fit_procrustes(canonical, deformed);
        sq += squared_residual(canonical, deformed, fit.transform);
        count += static_cast<int>(deformed.size());
      }
      const double point_rms = std::sqrt(sq / count);
      CHECK(point_rms <= 3.0 * sigma);
    }
  }
  SUBCASE("non-rigid group rejected") {
    Rng rng(113);
    const DynamicScene scene = testutil::random_scene(rng, 5, 2, 3);
    grouping::MotionGroup group;
    group.tau = 0;
    CHECK_THROWS_AS(rigidfit::init_rigid_trajectories(scene, group, 0),
                    ConfigError);
  }
  SUBCASE("tiny groups fall back to translation-only fits") {
    DynamicScene scene;
    SE3Transform step;
    step.translation = {1, 0, 0};
    scene.motion.bases.push_back({SE3Transform::identity(), step});
    for (int i = 0; i < 2; ++i) {
      GaussianCanonical g;
      g.id = i;
      g.mean_c = {static_cast<double>(i), 0, 0};
      g.weights = {1.0};
      scene.gaussians.push_back(g);
    }
    scene.cameras.assign(2, testutil::default_camera());
    grouping::MotionGroup group;
    group.tau = 1;
    group.member_ids = {0, 1};
    const rigidfit::RigidTrajectory traj =
        rigidfit::init_rigid_trajectories(scene, group, 0);
    CHECK(quat_angle(traj.transforms[1].rotation, Quat::identity()) == 0.0);
    CHECK((traj.transforms[1].translation - Eigen::Vector3d(1, 0, 0)).norm() <
          1e-12);
  }
}
