#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "core/rng.hpp"
#include "core/scene.hpp"
#include "grouping/grouping.hpp"

namespace mogaf::forecast {

struct ForecasterConfig {
  int d_model = 32;
  int heads = 8;
  int ff_dim = 64;
  int layers = 1;
  double dropout = 0.2;
  int window = 16;  // input steps fed to the model
  double lambda_acc = 1.0;
  int epochs = 200;
  int batch_size = 16;
  double learning_rate = 0.01;
  double mask_start = 0.40;  // masked-span ratio, annealed linearly
  double mask_end = 0.0;
  uint64_t seed = 0;

  void validate() const;
};

// Per-sequence per-channel statistics; std floored at 1e-6.
struct NormalizationState {
  Eigen::RowVectorXd mean;  // 1 x 7
  Eigen::RowVectorXd std;   // 1 x 7
};

struct ForecasterModel {
  ForecasterConfig config;
  // Named parameter tensors in a fixed order (deterministic iteration).
  std::vector<std::pair<std::string, Eigen::MatrixXd>> params;

  Eigen::MatrixXd& param(const std::string& name);
  const Eigen::MatrixXd& param(const std::string& name) const;
  long parameter_count() const;
};

struct TrainReport {
  std::vector<double> epoch_loss;
  double final_loss = 0.0;
};

// Deterministic initialization from the config seed.
ForecasterModel init_model(const ForecasterConfig& config);

// Channel-wise standardization over the window (population statistics).
std::pair<Eigen::MatrixXd, NormalizationState> instance_normalize(
    const Eigen::MatrixXd& seq);
Eigen::MatrixXd denormalize(const Eigen::MatrixXd& seq,
                            const NormalizationState& state);

// Contiguous span of length round(ratio * window), uniform start, replaced
// by the given token row. The final frame is never covered.
std::pair<Eigen::MatrixXd, std::vector<int>> mask_span(
    const Eigen::MatrixXd& seq, double ratio, Rng& rng,
    const Eigen::RowVectorXd& token);
std::vector<int> span_indices(int window, double ratio, Rng& rng);

double mask_ratio_at(const ForecasterConfig& config, int epoch);

// Makes consecutive quaternion rows dot nonnegatively (double-cover fix).
void align_quaternion_signs(Eigen::MatrixXd& seq);

// One-step prediction for a raw window x 7 sequence. Evaluation mode:
// dropout off, quaternion part renormalized with w >= 0.
Eigen::Matrix<double, 7, 1> forward(const ForecasterModel& model,
                                    const Eigen::MatrixXd& seq);

// Prediction computed through the differentiation tape, before quaternion
// renormalization. Exists to cross-check the evaluation-mode forward pass.
Eigen::Matrix<double, 7, 1> tape_prediction(const ForecasterModel& model,
                                            const Eigen::MatrixXd& seq);

// L_pred + lambda_acc * L_acc over a batch; prev_two_means holds
// (mu_{T-1}, mu_{T-2}) per sample.
double loss_group(
    const std::vector<Eigen::Matrix<double, 7, 1>>& predictions,
    const std::vector<Eigen::Matrix<double, 7, 1>>& targets,
    const std::vector<std::pair<Eigen::Vector3d, Eigen::Vector3d>>&
        prev_two_means,
    double lambda_acc);

// Sliding-window supervised training over the per-gaussian sequences
// (each T x 7, T >= window + 1) with annealed span masking and an Adam
// optimizer. Deterministic given config.seed.
ForecasterModel train_group(const std::vector<Eigen::MatrixXd>& sequences,
                            const ForecasterConfig& config,
                            TrainReport* report = nullptr);

// One training sample: raw window plus supervision frames.
struct Sample {
  Eigen::MatrixXd input;               // window x 7
  Eigen::Matrix<double, 7, 1> target;  // frame following the window
  Eigen::Vector3d prev_mean1;          // mu_{T-1}
  Eigen::Vector3d prev_mean2;          // mu_{T-2}
};

std::vector<Sample> make_samples(const std::vector<Eigen::MatrixXd>& sequences,
                                 int window);

// Analytic vs central finite-difference gradients of the batch loss on
// random parameter coordinates, dropout disabled.
double check_model_gradients(const ForecasterModel& model,
                             const std::vector<Sample>& batch, int probes,
                             uint64_t seed = 0);

// Autoregressive continuation: horizon x 7, each row a unit-quaternion
// prediction appended to the sliding window.
Eigen::MatrixXd rollout(const ForecasterModel& model,
                        const Eigen::MatrixXd& seed_seq, int horizon);

// Group-wise rollouts over all gaussians. models is keyed by group index;
// key -1 is the scene-global fallback for unassigned gaussians.
TrajectoryTensor forecast_bank(const DynamicScene& scene,
                               const grouping::MemoryBank& bank,
                               const std::map<int, ForecasterModel>& models,
                               int horizon);

}  // namespace mogaf::forecast
