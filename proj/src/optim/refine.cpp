#include "optim/refine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "core/errors.hpp"
#include "core/rng.hpp"

namespace mogaf::optim {

namespace {

struct LossBreakdown {
  double fit = 0.0;
  double rigid = 0.0;  // unweighted sums
  double nr = 0.0;
  double motion = 0.0;
  double total = 0.0;
};

// Gradients with the lambda weights baked in.
struct Gradients {
  Eigen::MatrixXd trans;    // (B*T) x 3
  Eigen::MatrixXd rot;      // (B*T) x 3, local axis-angle increments at zero
  Eigen::MatrixXd weights;  // N x B

  void resize(int b, int t, int n) {
    trans.setZero(b * t, n >= 0 ? 3 : 3);
    rot.setZero(b * t, 3);
    weights.setZero(n, b);
  }
  double norm() const {
    return std::sqrt(trans.squaredNorm() + rot.squaredNorm() +
                     weights.squaredNorm());
  }
};

struct Problem {
  const grouping::MemoryBank* bank;
  const OptimParams* params;
  // Per gaussian (scene order): observed row and rigid group (-1 when none).
  std::vector<const std::array<double, 7>*> observed_rows;  // [i*T + t]
  std::vector<int> rigid_group_of;
  std::vector<NeighborPairs> nr_pairs;  // per group (empty for rigid groups)
};

Problem build_problem(const DynamicScene& scene,
                      const grouping::MemoryBank& bank,
                      const TrajectoryTensor& observed,
                      const OptimParams& params) {
  const int t_count = scene.num_timesteps();
  if (observed.length() < t_count) {
    throw DimensionError("refine: observed trajectories shorter than scene");
  }
  Problem p;
  p.bank = &bank;
  p.params = &params;
  p.observed_rows.resize(scene.gaussians.size() * t_count);
  p.rigid_group_of.assign(scene.gaussians.size(), -1);
  for (size_t i = 0; i < scene.gaussians.size(); ++i) {
    const int row = observed.index_of(scene.gaussians[i].id);
    if (row < 0) {
      throw DimensionError("refine: observed trajectories missing gaussian " +
                           std::to_string(scene.gaussians[i].id));
    }
    for (int t = 0; t < t_count; ++t) {
      p.observed_rows[i * t_count + t] = &observed.values[row][t];
    }
    const int k = bank.group_of(scene.gaussians[i].id);
    if (k >= 0 && bank.groups[k].tau == 1) p.rigid_group_of[i] = k;
  }
  p.nr_pairs.resize(bank.groups.size());
  for (size_t k = 0; k < bank.groups.size(); ++k) {
    if (bank.groups[k].tau == 0) {
      p.nr_pairs[k] = build_neighbor_pairs(scene, bank.groups[k],
                                           params.nn_count);
    }
  }
  return p;
}

// Evaluates L_total (and optionally its gradient) for the current scene
// parameters with the rigid anchors held fixed.
LossBreakdown evaluate(const DynamicScene& scene, const Problem& p,
                       const std::map<int, rigidfit::RigidTrajectory>& anchors,
                       Gradients* grad) {
  const auto& params = *p.params;
  const int t_count = scene.num_timesteps();
  const int num_bases = scene.motion.num_bases();
  const int n = static_cast<int>(scene.gaussians.size());
  const double fit_norm = 1.0 / (static_cast<double>(n) * t_count);

  if (grad) grad->resize(num_bases, t_count, n);

  LossBreakdown loss;
  for (int t = 0; t < t_count; ++t) {
    const auto bases = scene.motion.at_time(t);
    const Eigen::Vector4d qref = bases.front().rotation.coeffs();
    // Precompute sign-aligned basis quaternions at this timestep.
    std::vector<Eigen::Vector4d> qb(num_bases);
    std::vector<double> sigma(num_bases);
    for (int b = 0; b < num_bases; ++b) {
      qb[b] = bases[b].rotation.coeffs();
      sigma[b] = qb[b].dot(qref) < 0.0 ? -1.0 : 1.0;
      qb[b] *= sigma[b];
    }
    for (int i = 0; i < n; ++i) {
      const auto& g = scene.gaussians[i];
      Eigen::Vector4d qsum = Eigen::Vector4d::Zero();
      Eigen::Vector3d tsum = Eigen::Vector3d::Zero();
      for (int b = 0; b < num_bases; ++b) {
        qsum += g.weights[b] * qb[b];
        tsum += g.weights[b] * bases[b].translation;
      }
      const double qnorm = qsum.norm();
      if (qnorm < 1e-12) {
        throw DegenerateBlendError("refine: degenerate blend during eval");
      }
      const Eigen::Vector4d qhat = qsum / qnorm;
      const Quat q = Quat::from_coeffs(qhat);
      const Eigen::Vector3d mu = q.rotate(g.mean_c) + tsum;

      Eigen::Vector3d gmu = Eigen::Vector3d::Zero();
      const auto& obs = *p.observed_rows[static_cast<size_t>(i) * t_count + t];
      const Eigen::Vector3d diff_fit =
          mu - TrajectoryTensor::mean_of(obs);
      loss.fit += fit_norm * diff_fit.squaredNorm();
      gmu += 2.0 * params.lambda_fit * fit_norm * diff_fit;

      const int rk = p.rigid_group_of[i];
      if (rk >= 0) {
        const auto it = anchors.find(rk);
        if (it == anchors.end()) {
          throw ConfigError("refine: rigid group without anchor trajectory");
        }
        const Eigen::Vector3d anchored =
            it->second.transforms[t].apply(g.mean_c);
        const Eigen::Vector3d diff_r = mu - anchored;
        loss.rigid += diff_r.squaredNorm();
        gmu += 2.0 * params.lambda_rigid * diff_r;
      }

      if (grad) {
        const Eigen::Matrix<double, 3, 4> jac =
            rotate_jacobian_wrt_quat(q, g.mean_c);
        const Eigen::Vector4d gqhat = jac.transpose() * gmu;
        const Eigen::Vector4d gqsum =
            (gqhat - qhat * qhat.dot(gqhat)) / qnorm;
        for (int b = 0; b < num_bases; ++b) {
          const double w = g.weights[b];
          const int bt = b * t_count + t;
          grad->trans.row(bt) += (w * gmu).transpose();
          grad->weights(i, b) +=
              qb[b].dot(gqsum) + bases[b].translation.dot(gmu);
          // d qsum / d delta_j = 0.5 * w * sigma_b * (q_b x e_j)
          const Quat base_q = bases[b].rotation;
          for (int j = 0; j < 3; ++j) {
            Quat ej{0.0, j == 0 ? 1.0 : 0.0, j == 1 ? 1.0 : 0.0,
                    j == 2 ? 1.0 : 0.0};
            const Quat dq = base_q * ej;
            grad->rot(bt, j) +=
                0.5 * w * sigma[b] * dq.coeffs().dot(gqsum);
          }
        }
      }
    }
  }

  // Non-rigid smoothness over directed neighbor pairs.
  for (size_t k = 0; k < p.bank->groups.size(); ++k) {
    for (const auto& [a, bidx] : p.nr_pairs[k]) {
      const auto& wa = scene.gaussians[a].weights;
      const auto& wb = scene.gaussians[bidx].weights;
      for (int c = 0; c < num_bases; ++c) {
        const double d = wa[c] - wb[c];
        loss.nr += d * d;
        if (grad) {
          grad->weights(a, c) += 2.0 * params.lambda_nr * d;
          grad->weights(bidx, c) -= 2.0 * params.lambda_nr * d;
        }
      }
    }
  }

  loss.motion = params.lambda_rigid * loss.rigid + params.lambda_nr * loss.nr;
  loss.total = params.lambda_fit * loss.fit + loss.motion;
  if (!std::isfinite(loss.total)) {
    throw NumericalError("refine: non-finite loss");
  }
  return loss;
}

std::map<int, rigidfit::RigidTrajectory> fit_anchors(
    const DynamicScene& scene, const grouping::MemoryBank& bank) {
  std::map<int, rigidfit::RigidTrajectory> anchors;
  for (size_t k = 0; k < bank.groups.size(); ++k) {
    if (bank.groups[k].tau == 1 && !bank.groups[k].member_ids.empty()) {
      anchors[static_cast<int>(k)] = rigidfit::init_rigid_trajectories(
          scene, bank.groups[k], static_cast<int>(k));
    }
  }
  return anchors;
}

// Euclidean projection onto the probability simplex.
void project_simplex(std::vector<double>& w) {
  std::vector<double> u(w.begin(), w.end());
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cumsum = 0.0, theta = 0.0;
  int rho = 0;
  for (size_t j = 0; j < u.size(); ++j) {
    cumsum += u[j];
    const double candidate = (cumsum - 1.0) / static_cast<double>(j + 1);
    if (u[j] - candidate > 0.0) {
      rho = static_cast<int>(j + 1);
      theta = candidate;
    }
  }
  (void)rho;
  for (double& x : w) x = std::max(0.0, x - theta);
}

void apply_step(DynamicScene& scene, const Gradients& grad, double step) {
  const int t_count = scene.num_timesteps();
  for (int b = 0; b < scene.motion.num_bases(); ++b) {
    for (int t = 0; t < t_count; ++t) {
      const int bt = b * t_count + t;
      auto& tf = scene.motion.bases[b][t];
      tf.translation -= step * grad.trans.row(bt).transpose();
      const Eigen::Vector3d delta = -step * grad.rot.row(bt).transpose();
      tf.rotation = (tf.rotation * Quat::exp_map(delta)).normalized().canonical();
    }
  }
  for (size_t i = 0; i < scene.gaussians.size(); ++i) {
    auto& w = scene.gaussians[i].weights;
    for (size_t b = 0; b < w.size(); ++b) {
      w[b] -= step * grad.weights(static_cast<int>(i), static_cast<int>(b));
    }
    project_simplex(w);
  }
}

}  // namespace

void OptimParams::validate() const {
  if (lambda_rigid < 0 || lambda_nr < 0 || lambda_fit < 0) {
    throw ConfigError("OptimParams: lambdas must be >= 0");
  }
  if (steps < 1) throw ConfigError("OptimParams: steps >= 1");
  if (learning_rate <= 0) throw ConfigError("OptimParams: positive lr required");
  if (nn_count < 1 || rigid_refresh < 1) {
    throw ConfigError("OptimParams: counts must be >= 1");
  }
}

NeighborPairs build_neighbor_pairs(const DynamicScene& scene,
                                   const grouping::MotionGroup& group,
                                   int nn_count) {
  std::vector<int> rows;
  for (size_t i = 0; i < scene.gaussians.size(); ++i) {
    if (group.member_ids.count(scene.gaussians[i].id)) {
      rows.push_back(static_cast<int>(i));
    }
  }
  NeighborPairs pairs;
  if (rows.size() < 2) return pairs;  // too small to regularize
  for (int i : rows) {
    std::vector<std::pair<double, int>> d;
    for (int j : rows) {
      if (j == i) continue;
      d.emplace_back(
          (scene.gaussians[i].mean_c - scene.gaussians[j].mean_c).norm(), j);
    }
    const size_t k = std::min<size_t>(nn_count, d.size());
    std::partial_sort(d.begin(), d.begin() + k, d.end());
    for (size_t m = 0; m < k; ++m) pairs.emplace_back(i, d[m].second);
  }
  return pairs;
}

double rigid_loss(const DynamicScene& scene, const grouping::MotionGroup& group,
                  const rigidfit::RigidTrajectory& rigid_traj) {
  if (group.tau != 1) throw ConfigError("rigid_loss: group is not rigid");
  if (static_cast<int>(rigid_traj.transforms.size()) != scene.num_timesteps()) {
    throw DimensionError("rigid_loss: trajectory length != scene T");
  }
  double loss = 0.0;
  for (const auto& g : scene.gaussians) {
    if (!group.member_ids.count(g.id)) continue;
    for (int t = 0; t < scene.num_timesteps(); ++t) {
      const Eigen::Vector3d mu = deform_gaussian(g, scene.motion, t).mean;
      loss += (mu - rigid_traj.transforms[t].apply(g.mean_c)).squaredNorm();
    }
  }
  return loss;
}

double nonrigid_loss(const DynamicScene& scene,
                     const grouping::MotionGroup& group,
                     const NeighborPairs& neighbor_graph) {
  (void)group;
  double loss = 0.0;
  for (const auto& [a, b] : neighbor_graph) {
    const auto& wa = scene.gaussians[a].weights;
    const auto& wb = scene.gaussians[b].weights;
    for (size_t c = 0; c < wa.size(); ++c) {
      const double d = wa[c] - wb[c];
      loss += d * d;
    }
  }
  return loss;
}

double motion_loss(const DynamicScene& scene, const grouping::MemoryBank& bank,
                   const std::map<int, rigidfit::RigidTrajectory>& rigid_trajs,
                   const OptimParams& params) {
  double loss = 0.0;
  for (size_t k = 0; k < bank.groups.size(); ++k) {
    const auto& group = bank.groups[k];
    if (group.member_ids.empty()) continue;
    if (group.tau == 1) {
      const auto it = rigid_trajs.find(static_cast<int>(k));
      if (it == rigid_trajs.end()) {
        throw ConfigError("motion_loss: rigid group without trajectory");
      }
      loss += params.lambda_rigid * rigid_loss(scene, group, it->second);
    } else {
      const auto pairs = build_neighbor_pairs(scene, group, params.nn_count);
      loss += params.lambda_nr * nonrigid_loss(scene, group, pairs);
    }
  }
  return loss;
}

double fit_loss(const DynamicScene& scene, const TrajectoryTensor& observed) {
  const int t_count = scene.num_timesteps();
  if (observed.length() < t_count) {
    throw DimensionError("fit_loss: observed shorter than scene");
  }
  double loss = 0.0;
  for (const auto& g : scene.gaussians) {
    const int row = observed.index_of(g.id);
    if (row < 0) throw DimensionError("fit_loss: missing observed gaussian");
    for (int t = 0; t < t_count; ++t) {
      const Eigen::Vector3d mu = deform_gaussian(g, scene.motion, t).mean;
      loss += (mu - TrajectoryTensor::mean_of(observed.values[row][t]))
                  .squaredNorm();
    }
  }
  return loss / (static_cast<double>(scene.gaussians.size()) * t_count);
}

std::pair<DynamicScene, OptimReport> refine(const DynamicScene& scene,
                                            const grouping::MemoryBank& bank,
                                            const TrajectoryTensor& observed,
                                            const OptimParams& params) {
  params.validate();
  const auto start = std::chrono::steady_clock::now();
  DynamicScene current = scene;
  const Problem problem = build_problem(current, bank, observed, params);
  auto anchors = fit_anchors(current, bank);

  OptimReport report;
  Gradients grad;
  LossBreakdown loss = evaluate(current, problem, anchors, &grad);
  for (int step = 0; step < params.steps; ++step) {
    report.fit_loss.push_back(loss.fit);
    report.rigid_loss.push_back(loss.rigid);
    report.nr_loss.push_back(loss.nr);
    report.motion_loss.push_back(loss.motion);
    report.total_loss.push_back(loss.total);
    report.grad_norm.push_back(grad.norm());

    // Backtracking line search on the full parameter vector.
    double step_size = params.learning_rate;
    bool accepted = false;
    LossBreakdown candidate_loss;
    DynamicScene candidate;
    for (int h = 0; h <= params.max_halvings; ++h) {
      candidate = current;
      apply_step(candidate, grad, step_size);
      candidate_loss = evaluate(candidate, problem, anchors, nullptr);
      if (candidate_loss.total <= loss.total) {
        accepted = true;
        break;
      }
      step_size *= 0.5;
    }
    if (!accepted) break;
    const double improvement = loss.total - candidate_loss.total;
    current = std::move(candidate);
    ++report.accepted_steps;
    if (report.accepted_steps % params.rigid_refresh == 0) {
      anchors = fit_anchors(current, bank);
    }
    loss = evaluate(current, problem, anchors, &grad);
    if (improvement < params.tolerance) break;
  }
  report.wall_time_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return {std::move(current), std::move(report)};
}

double check_gradients(const DynamicScene& scene,
                       const grouping::MemoryBank& bank,
                       const TrajectoryTensor& observed,
                       const OptimParams& params, int probes, uint64_t seed) {
  params.validate();
  if (probes < 1) throw ConfigError("check_gradients: probes >= 1 required");
  const Problem problem = build_problem(scene, bank, observed, params);
  const auto anchors = fit_anchors(scene, bank);
  Gradients grad;
  evaluate(scene, problem, anchors, &grad);

  Rng rng(seed);
  const int t_count = scene.num_timesteps();
  const int num_bases = scene.motion.num_bases();
  const int n = static_cast<int>(scene.gaussians.size());
  double max_err = 0.0;

  auto loss_of = [&](const DynamicScene& s) {
    return evaluate(s, problem, anchors, nullptr).total;
  };

  for (int probe = 0; probe < probes; ++probe) {
    const int block = static_cast<int>(rng.index(3));
    double analytic = 0.0, fd = 0.0;
    if (block == 0) {  // basis translation
      const int b = static_cast<int>(rng.index(num_bases));
      const int t = static_cast<int>(rng.index(t_count));
      const int j = static_cast<int>(rng.index(3));
      analytic = grad.trans(b * t_count + t, j);
      const double x = scene.motion.bases[b][t].translation[j];
      const double h = 1e-5 * std::max(1.0, std::abs(x));
      DynamicScene plus = scene, minus = scene;
      plus.motion.bases[b][t].translation[j] = x + h;
      minus.motion.bases[b][t].translation[j] = x - h;
      fd = (loss_of(plus) - loss_of(minus)) / (2.0 * h);
    } else if (block == 1) {  // basis rotation increment
      const int b = static_cast<int>(rng.index(num_bases));
      const int t = static_cast<int>(rng.index(t_count));
      const int j = static_cast<int>(rng.index(3));
      analytic = grad.rot(b * t_count + t, j);
      const double h = 1e-5;
      Eigen::Vector3d delta = Eigen::Vector3d::Zero();
      delta[j] = h;
      DynamicScene plus = scene, minus = scene;
      plus.motion.bases[b][t].rotation =
          (scene.motion.bases[b][t].rotation * Quat::exp_map(delta)).normalized();
      minus.motion.bases[b][t].rotation =
          (scene.motion.bases[b][t].rotation * Quat::exp_map(-delta)).normalized();
      fd = (loss_of(plus) - loss_of(minus)) / (2.0 * h);
    } else {  // blend weight
      const int i = static_cast<int>(rng.index(n));
      const int b = static_cast<int>(rng.index(num_bases));
      analytic = grad.weights(i, b);
      const double x = scene.gaussians[i].weights[b];
      const double h = 1e-5 * std::max(1.0, std::abs(x));
      DynamicScene plus = scene, minus = scene;
      plus.gaussians[i].weights[b] = x + h;
      minus.gaussians[i].weights[b] = x - h;
      fd = (loss_of(plus) - loss_of(minus)) / (2.0 * h);
    }
    const double scale = std::max(std::abs(analytic), std::abs(fd));
    const double err = scale < 1e-8 ? 0.0 : std::abs(analytic - fd) / scale;
    max_err = std::max(max_err, err);
  }
  return max_err;
}

}  // namespace mogaf::optim
