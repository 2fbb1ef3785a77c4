#include "metrics/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "core/errors.hpp"

namespace mogaf::metrics {

namespace {

constexpr double kPixelThresholds[] = {1.0, 2.0, 4.0, 8.0, 16.0};

// Row of gt aligned with each row of pred. Throws on any mismatch.
std::vector<int> align(const TrajectoryTensor& pred, const TrajectoryTensor& gt) {
  if (pred.gaussian_ids.size() != gt.gaussian_ids.size() ||
      pred.length() != gt.length() || pred.length() == 0 ||
      pred.start_timestep != gt.start_timestep) {
    throw DimensionError("metrics: prediction and ground truth are misaligned");
  }
  std::map<GaussianId, int> gt_row;
  for (size_t i = 0; i < gt.gaussian_ids.size(); ++i) {
    gt_row[gt.gaussian_ids[i]] = static_cast<int>(i);
  }
  std::vector<int> rows(pred.gaussian_ids.size());
  for (size_t i = 0; i < pred.gaussian_ids.size(); ++i) {
    auto it = gt_row.find(pred.gaussian_ids[i]);
    if (it == gt_row.end()) {
      throw DimensionError("metrics: prediction contains an unknown gaussian id");
    }
    rows[i] = it->second;
  }
  return rows;
}

double percent(long hits, long total) {
  return total == 0 ? 0.0
                    : 100.0 * static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace

double epe_3d(const TrajectoryTensor& pred, const TrajectoryTensor& gt) {
  const std::vector<int> rows = align(pred, gt);
  double sum = 0.0;
  long count = 0;
  for (size_t i = 0; i < pred.gaussian_ids.size(); ++i) {
    for (int t = 0; t < pred.length(); ++t) {
      sum += (TrajectoryTensor::mean_of(pred.values[i][t]) -
              TrajectoryTensor::mean_of(gt.values[rows[i]][t]))
                 .norm();
      ++count;
    }
  }
  return sum / static_cast<double>(count);
}

double delta_3d_abs(const TrajectoryTensor& pred, const TrajectoryTensor& gt,
                    double threshold) {
  const std::vector<int> rows = align(pred, gt);
  long hits = 0, total = 0;
  for (size_t i = 0; i < pred.gaussian_ids.size(); ++i) {
    for (int t = 0; t < pred.length(); ++t) {
      const double err = (TrajectoryTensor::mean_of(pred.values[i][t]) -
                          TrajectoryTensor::mean_of(gt.values[rows[i]][t]))
                             .norm();
      if (err < threshold) ++hits;
      ++total;
    }
  }
  return percent(hits, total);
}

double delta_3d(const TrajectoryTensor& pred, const TrajectoryTensor& gt,
                double threshold_fraction) {
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::max());
  Eigen::Vector3d hi = Eigen::Vector3d::Constant(std::numeric_limits<double>::lowest());
  for (const auto& traj : gt.values) {
    for (const auto& v : traj) {
      const Eigen::Vector3d m = TrajectoryTensor::mean_of(v);
      lo = lo.cwiseMin(m);
      hi = hi.cwiseMax(m);
    }
  }
  const double diagonal = (hi - lo).norm();
  if (!(diagonal > 0.0)) {
    throw DegenerateGeometryError("delta_3d: ground-truth bounding box has zero diagonal");
  }
  return delta_3d_abs(pred, gt, threshold_fraction * diagonal);
}

Metrics2d metrics_2d(const TrajectoryTensor& pred, const TrajectoryTensor& gt,
                     const std::vector<Camera>& cameras,
                     const OcclusionFlags* occlusion_gt) {
  const std::vector<int> rows = align(pred, gt);
  const int t_count = pred.length();
  const size_t n = pred.gaussian_ids.size();
  if (static_cast<int>(cameras.size()) < t_count) {
    throw DimensionError("metrics_2d: not enough cameras for the evaluated window");
  }
  if (occlusion_gt) {
    if (occlusion_gt->size() != n) {
      throw DimensionError("metrics_2d: occlusion flags misaligned with gaussians");
    }
    for (const auto& flags : *occlusion_gt) {
      if (static_cast<int>(flags.size()) != t_count) {
        throw DimensionError("metrics_2d: occlusion flags misaligned with timesteps");
      }
    }
  }

  // Pixel error per point (normalized to 256 px on the long side), plus
  // predicted visibility from frustum containment and a predicted z-buffer.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> err(n, std::vector<double>(t_count, inf));
  std::vector<std::vector<bool>> pred_visible(n, std::vector<bool>(t_count, false));

  for (int t = 0; t < t_count; ++t) {
    const Camera& cam = cameras[t];
    const double norm_scale =
        256.0 / static_cast<double>(std::max(cam.width, cam.height));

    std::vector<double> pu(n), pv(n), pd(n, -1.0);
    std::map<std::pair<int, int>, double> zbuf;
    for (size_t i = 0; i < n; ++i) {
      try {
        const Projection p =
            project_mean(TrajectoryTensor::mean_of(pred.values[i][t]), cam);
        pu[i] = p.u;
        pv[i] = p.v;
        pd[i] = p.depth;
        const int px = static_cast<int>(std::floor(p.u));
        const int py = static_cast<int>(std::floor(p.v));
        if (px >= 0 && px < cam.width && py >= 0 && py < cam.height) {
          auto [it, inserted] = zbuf.try_emplace({px, py}, p.depth);
          if (!inserted) it->second = std::min(it->second, p.depth);
        }
      } catch (const BehindCameraError&) {
        pd[i] = -1.0;
      }
    }
    for (size_t i = 0; i < n; ++i) {
      if (pd[i] <= 0.0) continue;
      const int px = static_cast<int>(std::floor(pu[i]));
      const int py = static_cast<int>(std::floor(pv[i]));
      const bool in_frame =
          px >= 0 && px < cam.width && py >= 0 && py < cam.height;
      if (in_frame) {
        const double front = zbuf.at({px, py});
        pred_visible[i][t] = pd[i] <= front + 1e-9;
      }
      try {
        const Projection g = project_mean(
            TrajectoryTensor::mean_of(gt.values[rows[i]][t]), cam);
        err[i][t] = norm_scale *
                    std::hypot(pu[i] - g.u, pv[i] - g.v);
      } catch (const BehindCameraError&) {
        err[i][t] = inf;
      }
    }
  }

  auto gt_visible = [&](size_t i, int t) {
    return !occlusion_gt || !(*occlusion_gt)[rows[i]][t];
  };

  Metrics2d out;
  double delta_sum = 0.0;
  for (double threshold : kPixelThresholds) {
    long hits = 0, total = 0;
    for (size_t i = 0; i < n; ++i) {
      for (int t = 0; t < t_count; ++t) {
        if (!gt_visible(i, t)) continue;
        ++total;
        if (err[i][t] < threshold) ++hits;
      }
    }
    delta_sum += percent(hits, total);
  }
  out.delta_avg = delta_sum / std::size(kPixelThresholds);

  if (occlusion_gt) {
    long correct = 0, total = 0;
    for (size_t i = 0; i < n; ++i) {
      for (int t = 0; t < t_count; ++t) {
        ++total;
        if (pred_visible[i][t] == gt_visible(i, t)) ++correct;
      }
    }
    out.oa = percent(correct, total);

    double jaccard_sum = 0.0;
    for (double threshold : kPixelThresholds) {
      long tp = 0, fp = 0, fn = 0;
      for (size_t i = 0; i < n; ++i) {
        for (int t = 0; t < t_count; ++t) {
          const bool close = err[i][t] < threshold;
          if (gt_visible(i, t)) {
            if (pred_visible[i][t] && close) {
              ++tp;
            } else {
              ++fn;
              if (pred_visible[i][t]) ++fp;  // visible but off target
            }
          } else if (pred_visible[i][t]) {
            ++fp;
          }
        }
      }
      const long denom = tp + fp + fn;
      jaccard_sum += denom == 0 ? 100.0 : percent(tp, denom);
    }
    out.aj = jaccard_sum / std::size(kPixelThresholds);
  }
  return out;
}

TrackingReport evaluate(const TrajectoryTensor& pred,
                        const TrajectoryTensor& gt,
                        const std::vector<Camera>& cameras,
                        const OcclusionFlags* occlusion_gt) {
  TrackingReport report;
  report.epe = epe_3d(pred, gt);
  report.delta3d_10 = delta_3d(pred, gt, 0.10);
  report.delta3d_05 = delta_3d(pred, gt, 0.05);
  const Metrics2d m2 = metrics_2d(pred, gt, cameras, occlusion_gt);
  report.aj = m2.aj;
  report.delta_avg_2d = m2.delta_avg;
  report.oa = m2.oa;
  report.evaluated_points =
      static_cast<long>(pred.gaussian_ids.size()) * pred.length();
  return report;
}

}  // namespace mogaf::metrics
