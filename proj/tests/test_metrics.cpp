#include <cmath>

#include "core/errors.hpp"
#include "doctest.h"
#include "metrics/tracking.hpp"
#include "test_helpers.hpp"

using namespace mogaf;
using metrics::Metrics2d;
using metrics::OcclusionFlags;

namespace {

// Tensor with identity rotations; means[i][t] is the position of gaussian i.
TrajectoryTensor tensor(const std::vector<std::vector<Eigen::Vector3d>>& means,
                        int start = 0) {
  TrajectoryTensor out;
  out.start_timestep = start;
  for (size_t i = 0; i < means.size(); ++i) {
    out.gaussian_ids.push_back(static_cast<GaussianId>(i));
    std::vector<std::array<double, 7>> seq;
    for (const auto& m : means[i]) {
      seq.push_back(TrajectoryTensor::pack(m, Quat::identity()));
    }
    out.values.push_back(std::move(seq));
  }
  return out;
}

// 256x256 camera at the world origin looking down +z: with focal 256 a world
// offset of d at depth 1 moves the projection by 256*d pixels, and the
// long-side normalization factor is exactly 1.
Camera unit_camera() {
  Camera cam;
  cam.width = 256;
  cam.height = 256;
  cam.intrinsics << 256, 0, 128, 0, 256, 128, 0, 0, 1;
  return cam;
}

}  // namespace

TEST_CASE("epe_3d") {
  SUBCASE("hand-computed mean distance") {
    const auto gt = tensor({{{0, 0, 1}, {0, 0, 1}}, {{1, 0, 1}, {1, 0, 1}}});
    auto pred = gt;
    pred.values[0][0][0] += 0.3;  // error 0.3 at one of four points
    pred.values[1][1][1] += 0.1;  // error 0.1 at another
    CHECK(metrics::epe_3d(pred, gt) == doctest::Approx(0.1));
  }
  SUBCASE("row order does not matter") {
    const auto gt = tensor({{{0, 0, 1}}, {{2, 0, 1}}});
    auto pred = gt;
    std::swap(pred.gaussian_ids[0], pred.gaussian_ids[1]);
    std::swap(pred.values[0], pred.values[1]);
    pred.values[0][0][0] += 0.4;  // id 1 off by 0.4
    CHECK(metrics::epe_3d(pred, gt) == doctest::Approx(0.2));
  }
  SUBCASE("misalignment rejected") {
    const auto gt = tensor({{{0, 0, 1}, {0, 0, 1}}});
    auto pred = gt;
    pred.start_timestep = 1;
    CHECK_THROWS_AS(metrics::epe_3d(pred, gt), DimensionError);
    pred = gt;
    pred.gaussian_ids[0] = 42;
    CHECK_THROWS_AS(metrics::epe_3d(pred, gt), DimensionError);
    CHECK_THROWS_AS(metrics::epe_3d(tensor({}), tensor({})), DimensionError);
  }
}

TEST_CASE("delta_3d_abs") {
  SUBCASE("threshold is strict") {
    const auto gt = tensor({{{0, 0, 1}}});
    auto pred = gt;
    pred.values[0][0][0] += 0.5;
    CHECK(metrics::delta_3d_abs(pred, gt, 0.5) == doctest::Approx(0.0));
    CHECK(metrics::delta_3d_abs(pred, gt, 0.5 + 1e-9) ==
          doctest::Approx(100.0));
  }
  SUBCASE("half the points inside gives 50") {
    const auto gt = tensor({{{0, 0, 1}, {0, 0, 1}}, {{1, 0, 1}, {1, 0, 1}}});
    auto pred = gt;
    pred.values[0][0][0] += 1.0;
    pred.values[1][1][0] += 1.0;
    CHECK(metrics::delta_3d_abs(pred, gt, 0.5) == doctest::Approx(50.0));
  }
}

TEST_CASE("delta_3d normalizes by the GT bounding-box diagonal") {
  // GT spans the unit cube: diagonal sqrt(3).
  const auto gt = tensor({{{0, 0, 0}, {1, 1, 1}}, {{1, 0, 0}, {0, 1, 1}}});
  auto pred = gt;
  const double diag = std::sqrt(3.0);
  // One point off by just under 0.1 * diag, one by just over.
  pred.values[0][0][0] += 0.1 * diag - 1e-6;
  pred.values[1][0][1] += 0.1 * diag + 1e-6;
  CHECK(metrics::delta_3d(pred, gt, 0.10) == doctest::Approx(75.0));
  CHECK(metrics::delta_3d(pred, gt, 0.05) == doctest::Approx(50.0));
  SUBCASE("degenerate bounding box rejected") {
    const auto point = tensor({{{1, 2, 3}, {1, 2, 3}}});
    CHECK_THROWS_AS(metrics::delta_3d(point, point, 0.1),
                    DegenerateGeometryError);
  }
}

TEST_CASE("metrics_2d") {
  const std::vector<Camera> cams(1, unit_camera());
  SUBCASE("3-pixel error scores delta_avg 60") {
    const auto gt = tensor({{{0, 0, 1}}});
    auto pred = gt;
    pred.values[0][0][0] += 3.0 / 256.0;  // exactly 3 px at depth 1
    const Metrics2d m = metrics::metrics_2d(pred, gt, cams, nullptr);
    // Strictly below 4, 8, 16 but not 1 or 2: 3 of 5 thresholds.
    CHECK(m.delta_avg == doctest::Approx(60.0));
    CHECK_FALSE(m.aj.has_value());
    CHECK_FALSE(m.oa.has_value());
  }
  SUBCASE("exact 1-pixel error is outside the 1 px threshold") {
    const auto gt = tensor({{{0, 0, 1}}});
    auto pred = gt;
    pred.values[0][0][0] += 1.0 / 256.0;
    const Metrics2d m = metrics::metrics_2d(pred, gt, cams, nullptr);
    CHECK(m.delta_avg == doctest::Approx(80.0));
  }
  SUBCASE("perfect prediction with occlusion GT scores 100 everywhere") {
    const auto gt = tensor({{{0, 0, 1}}, {{0.1, 0, 1}}});
    const OcclusionFlags occ(2, std::vector<bool>(1, false));
    const Metrics2d m = metrics::metrics_2d(gt, gt, cams, &occ);
    CHECK(m.delta_avg == doctest::Approx(100.0));
    CHECK(m.aj.value() == doctest::Approx(100.0));
    CHECK(m.oa.value() == doctest::Approx(100.0));
  }
  SUBCASE("all predictions behind the camera score zero accuracy") {
    const auto gt = tensor({{{0, 0, 1}}, {{0.1, 0, 1}}});
    auto pred = gt;
    for (auto& seq : pred.values) seq[0][2] = -1.0;  // behind the camera
    const OcclusionFlags occ(2, std::vector<bool>(1, false));
    const Metrics2d m = metrics::metrics_2d(pred, gt, cams, &occ);
    CHECK(m.oa.value() == doctest::Approx(0.0));
    CHECK(m.aj.value() == doctest::Approx(0.0));
    CHECK(m.delta_avg == doctest::Approx(0.0));
  }
  SUBCASE("occluded GT with invisible predictions is fully correct") {
    const auto gt = tensor({{{0, 0, 1}}});
    auto pred = gt;
    pred.values[0][0][2] = -1.0;
    const OcclusionFlags occ(1, std::vector<bool>(1, true));
    const Metrics2d m = metrics::metrics_2d(pred, gt, cams, &occ);
    CHECK(m.oa.value() == doctest::Approx(100.0));
    // No visible points anywhere: the Jaccard denominator is empty.
    CHECK(m.aj.value() == doctest::Approx(100.0));
  }
  SUBCASE("visible but far counts as both false positive and false negative") {
    // Gaussian 0 predicted perfectly; gaussian 1 visible but 100 px off.
    const auto gt = tensor({{{0, 0, 1}}, {{0.2, 0, 1}}});
    auto pred = gt;
    pred.values[1][0][0] -= 100.0 / 256.0;
    const OcclusionFlags occ(2, std::vector<bool>(1, false));
    const Metrics2d m = metrics::metrics_2d(pred, gt, cams, &occ);
    // Per threshold: tp=1 (gaussian 0), fn=1 and fp=1 (gaussian 1).
    CHECK(m.aj.value() == doctest::Approx(100.0 / 3.0));
    CHECK(m.oa.value() == doctest::Approx(100.0));
    CHECK(m.delta_avg == doctest::Approx(50.0));
  }
  SUBCASE("predicted z-buffer hides the farther of two coincident points") {
    // Both predictions project to the same pixel; the farther one is flagged
    // invisible even though its ground truth is visible.
    const auto gt = tensor({{{0, 0, 1}}, {{0, 0, 2}}});
    const OcclusionFlags occ(2, std::vector<bool>(1, false));
    const Metrics2d m = metrics::metrics_2d(gt, gt, cams, &occ);
    CHECK(m.oa.value() == doctest::Approx(50.0));
  }
  SUBCASE("delta_avg skips GT-occluded points") {
    const auto gt = tensor({{{0, 0, 1}}, {{0.2, 0, 1}}});
    auto pred = gt;
    pred.values[1][0][0] += 50.0 / 256.0;  // badly wrong but occluded in GT
    OcclusionFlags occ(2, std::vector<bool>(1, false));
    occ[1][0] = true;
    const Metrics2d m = metrics::metrics_2d(pred, gt, cams, &occ);
    CHECK(m.delta_avg == doctest::Approx(100.0));
  }
  SUBCASE("occlusion shape mismatch rejected") {
    const auto gt = tensor({{{0, 0, 1}}});
    const OcclusionFlags occ(2, std::vector<bool>(1, false));
    CHECK_THROWS_AS(metrics::metrics_2d(gt, gt, cams, &occ), DimensionError);
    const OcclusionFlags occ2(1, std::vector<bool>(2, false));
    CHECK_THROWS_AS(metrics::metrics_2d(gt, gt, cams, &occ2), DimensionError);
  }
  SUBCASE("camera count must cover the window") {
    const auto gt = tensor({{{0, 0, 1}, {0, 0, 1}}});
    CHECK_THROWS_AS(metrics::metrics_2d(gt, gt, cams, nullptr),
                    DimensionError);
  }
}

TEST_CASE("evaluate aggregates all metrics") {
  const std::vector<Camera> cams(2, unit_camera());
  const auto gt =
      tensor({{{0, 0, 1}, {0.2, 0, 1}}, {{0.4, 0, 2}, {0.4, 0.2, 2}}});
  auto pred = gt;
  pred.values[0][1][0] += 0.01;
  SUBCASE("without occlusion GT the occlusion metrics are absent") {
    const metrics::TrackingReport r =
        metrics::evaluate(pred, gt, cams, nullptr);
    CHECK(r.epe == doctest::Approx(0.01 / 4.0));
    CHECK(r.evaluated_points == 4);
    CHECK_FALSE(r.aj.has_value());
    CHECK_FALSE(r.oa.has_value());
    CHECK(r.delta3d_10 == doctest::Approx(100.0));
    CHECK(r.delta3d_05 == doctest::Approx(100.0));
  }
  SUBCASE("with occlusion GT they are present") {
    const OcclusionFlags occ(2, std::vector<bool>(2, false));
    const metrics::TrackingReport r = metrics::evaluate(pred, gt, cams, &occ);
    CHECK(r.aj.has_value());
    CHECK(r.oa.has_value());
    CHECK(r.oa.value() == doctest::Approx(100.0));
  }
}
