#include "forecast/forecaster.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "core/errors.hpp"
#include "forecast/tape.hpp"

namespace mogaf::forecast {

namespace {

void check_finite(const Eigen::MatrixXd& m, const std::string& where) {
  if (!m.allFinite()) {
    throw NumericalError("forecaster: non-finite values in " + where);
  }
}

Eigen::MatrixXd weight_init(int rows, int cols, Rng& rng) {
  const double sigma = 1.0 / std::sqrt(static_cast<double>(rows));
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal(0.0, sigma);
  }
  return m;
}

}  // namespace

void ForecasterConfig::validate() const {
  if (d_model <= 0 || heads <= 0 || d_model % heads != 0) {
    throw ConfigError("forecaster: d_model must be a positive multiple of heads");
  }
  if (ff_dim <= 0 || layers <= 0) {
    throw ConfigError("forecaster: ff_dim and layers must be positive");
  }
  if (window < 3) {
    throw ConfigError("forecaster: window must be >= 3");
  }
  if (dropout < 0.0 || dropout >= 1.0) {
    throw ConfigError("forecaster: dropout must be in [0,1)");
  }
  if (mask_start < 0.0 || mask_start > 1.0 || mask_end < 0.0 || mask_end > 1.0) {
    throw ConfigError("forecaster: mask ratios must be in [0,1]");
  }
  if (epochs <= 0 || batch_size <= 0 || learning_rate <= 0.0) {
    throw ConfigError("forecaster: epochs, batch_size, learning_rate must be positive");
  }
  if (lambda_acc < 0.0) {
    throw ConfigError("forecaster: lambda_acc must be nonnegative");
  }
}

Eigen::MatrixXd& ForecasterModel::param(const std::string& name) {
  for (auto& [n, v] : params) {
    if (n == name) return v;
  }
  throw ConfigError("forecaster: unknown parameter " + name);
}

const Eigen::MatrixXd& ForecasterModel::param(const std::string& name) const {
  for (const auto& [n, v] : params) {
    if (n == name) return v;
  }
  throw ConfigError("forecaster: unknown parameter " + name);
}

long ForecasterModel::parameter_count() const {
  long count = 0;
  for (const auto& [n, v] : params) count += static_cast<long>(v.size());
  return count;
}

ForecasterModel init_model(const ForecasterConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const int d = config.d_model;
  const int w = config.window;

  ForecasterModel model;
  model.config = config;
  auto add = [&](const std::string& name, Eigen::MatrixXd value) {
    model.params.emplace_back(name, std::move(value));
  };

  add("embed_w", weight_init(7, d, rng));
  add("embed_b", Eigen::MatrixXd::Zero(1, d));
  add("pos", 0.02 * weight_init(w, d, rng));
  for (int l = 0; l < config.layers; ++l) {
    const std::string p = "l" + std::to_string(l) + ".";
    add(p + "wq", weight_init(d, d, rng));
    add(p + "bq", Eigen::MatrixXd::Zero(1, d));
    add(p + "wk", weight_init(d, d, rng));
    add(p + "bk", Eigen::MatrixXd::Zero(1, d));
    add(p + "wv", weight_init(d, d, rng));
    add(p + "bv", Eigen::MatrixXd::Zero(1, d));
    add(p + "wo", weight_init(d, d, rng));
    add(p + "bo", Eigen::MatrixXd::Zero(1, d));
    add(p + "ln1_g", Eigen::MatrixXd::Ones(1, d));
    add(p + "ln1_b", Eigen::MatrixXd::Zero(1, d));
    add(p + "w1", weight_init(d, config.ff_dim, rng));
    add(p + "b1", Eigen::MatrixXd::Zero(1, config.ff_dim));
    add(p + "w2", weight_init(config.ff_dim, d, rng));
    add(p + "b2", Eigen::MatrixXd::Zero(1, d));
    add(p + "ln2_g", Eigen::MatrixXd::Ones(1, d));
    add(p + "ln2_b", Eigen::MatrixXd::Zero(1, d));
  }
  add("head_w", weight_init(w * d, 7, rng));
  add("head_b", Eigen::MatrixXd::Zero(1, 7));
  add("mask_token", Eigen::MatrixXd::Zero(1, 7));
  return model;
}

std::pair<Eigen::MatrixXd, NormalizationState> instance_normalize(
    const Eigen::MatrixXd& seq) {
  if (seq.rows() < 2 || seq.cols() != 7) {
    throw DimensionError("instance_normalize: need a window x 7 sequence, window >= 2");
  }
  NormalizationState state;
  state.mean = seq.colwise().mean();
  Eigen::MatrixXd centered = seq.rowwise() - state.mean;
  state.std = centered.array().square().colwise().mean().sqrt().matrix();
  // Floor each channel's scale relative to the most dynamic channel: a fixed
  // tiny floor turns numerically quiet channels (e.g. constant quaternions
  // picking up rounding noise during autoregressive rollout) into huge
  // normalized features the model never saw in training.
  const double floor = std::max(1e-6, 1e-2 * state.std.maxCoeff());
  state.std = state.std.cwiseMax(floor);
  Eigen::MatrixXd normalized =
      centered.array().rowwise() / state.std.array();
  return {std::move(normalized), std::move(state)};
}

Eigen::MatrixXd denormalize(const Eigen::MatrixXd& seq,
                            const NormalizationState& state) {
  Eigen::MatrixXd out =
      (seq.array().rowwise() * state.std.array()).matrix();
  out.rowwise() += state.mean;
  return out;
}

std::vector<int> span_indices(int window, double ratio, Rng& rng) {
  if (ratio < 0.0 || ratio > 1.0) {
    throw ConfigError("span_indices: ratio must be in [0,1]");
  }
  int len = static_cast<int>(std::lround(ratio * window));
  len = std::min(len, window - 1);  // the final frame is never masked
  if (len <= 0) return {};
  const int start = static_cast<int>(rng.index(static_cast<uint64_t>(window - len)));
  std::vector<int> span(len);
  std::iota(span.begin(), span.end(), start);
  return span;
}

std::pair<Eigen::MatrixXd, std::vector<int>> mask_span(
    const Eigen::MatrixXd& seq, double ratio, Rng& rng,
    const Eigen::RowVectorXd& token) {
  std::vector<int> span = span_indices(static_cast<int>(seq.rows()), ratio, rng);
  Eigen::MatrixXd masked = seq;
  for (int i : span) masked.row(i) = token;
  return {std::move(masked), std::move(span)};
}

double mask_ratio_at(const ForecasterConfig& config, int epoch) {
  if (config.epochs <= 1) return config.mask_start;
  const double ratio =
      config.mask_start + (config.mask_end - config.mask_start) *
                              static_cast<double>(epoch) /
                              static_cast<double>(config.epochs - 1);
  // The interpolation can overshoot the endpoints by a rounding error.
  return std::clamp(ratio, 0.0, 1.0);
}

void align_quaternion_signs(Eigen::MatrixXd& seq) {
  for (int t = 1; t < seq.rows(); ++t) {
    const double dot = seq.row(t).tail(4).dot(seq.row(t - 1).tail(4));
    if (dot < 0.0) seq.row(t).tail(4) = -seq.row(t).tail(4);
  }
}

namespace {

// Tape-built batch loss; returns the scalar loss and optionally fills grads
// (aligned with model.params). Spans select masked rows per sample; droprng
// enables inverted dropout when non-null.
double run_batch(const ForecasterModel& model, const std::vector<Sample>& batch,
                 const std::vector<std::vector<int>>& spans, Rng* droprng,
                 std::vector<Eigen::MatrixXd>* grads,
                 std::vector<Eigen::Matrix<double, 7, 1>>* raw_preds = nullptr) {
  const ForecasterConfig& cfg = model.config;
  const int d = cfg.d_model;
  const int dh = d / cfg.heads;
  const double attn_scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const double keep = 1.0 - cfg.dropout;

  Tape tape;
  std::vector<Tape::NodeId> pnodes;
  pnodes.reserve(model.params.size());
  for (const auto& [name, value] : model.params) pnodes.push_back(tape.leaf(value));
  auto pn = [&](const std::string& name) -> Tape::NodeId {
    for (size_t i = 0; i < model.params.size(); ++i) {
      if (model.params[i].first == name) return pnodes[i];
    }
    throw ConfigError("forecaster: unknown parameter " + name);
  };
  const Tape::NodeId embed_w = pn("embed_w"), embed_b = pn("embed_b");
  const Tape::NodeId pos = pn("pos");
  const Tape::NodeId head_w = pn("head_w"), head_b = pn("head_b");
  const Tape::NodeId mask_token = pn("mask_token");

  auto dropout_mask = [&](Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) {
        m(i, j) = droprng->uniform() < keep ? 1.0 / keep : 0.0;
      }
    }
    return m;
  };

  Tape::NodeId loss_sum = -1;
  for (size_t s = 0; s < batch.size(); ++s) {
    Eigen::MatrixXd window = batch[s].input;
    align_quaternion_signs(window);
    auto [normalized, state] = instance_normalize(window);

    Tape::NodeId x = tape.leaf(normalized);
    if (!spans.empty() && !spans[s].empty()) {
      x = tape.replace_rows(x, mask_token, spans[s]);
    }
    Tape::NodeId h = tape.add(tape.add_rowvec(tape.matmul(x, embed_w), embed_b), pos);

    for (int l = 0; l < cfg.layers; ++l) {
      const std::string p = "l" + std::to_string(l) + ".";
      Tape::NodeId q = tape.add_rowvec(tape.matmul(h, pn(p + "wq")), pn(p + "bq"));
      Tape::NodeId k = tape.add_rowvec(tape.matmul(h, pn(p + "wk")), pn(p + "bk"));
      Tape::NodeId v = tape.add_rowvec(tape.matmul(h, pn(p + "wv")), pn(p + "bv"));
      std::vector<Tape::NodeId> heads;
      heads.reserve(cfg.heads);
      for (int hh = 0; hh < cfg.heads; ++hh) {
        Tape::NodeId qh = tape.slice_cols(q, hh * dh, dh);
        Tape::NodeId kh = tape.slice_cols(k, hh * dh, dh);
        Tape::NodeId vh = tape.slice_cols(v, hh * dh, dh);
        Tape::NodeId a = tape.softmax_rows(tape.scale(tape.matmul_nt(qh, kh), attn_scale));
        heads.push_back(tape.matmul(a, vh));
      }
      Tape::NodeId o = tape.add_rowvec(
          tape.matmul(tape.concat_cols(heads), pn(p + "wo")), pn(p + "bo"));
      if (droprng && cfg.dropout > 0.0) {
        o = tape.mask(o, dropout_mask(cfg.window, d));
      }
      Tape::NodeId h1 = tape.add_rowvec(
          tape.mul_rowvec(tape.layernorm_rows(tape.add(h, o)), pn(p + "ln1_g")),
          pn(p + "ln1_b"));
      Tape::NodeId f = tape.add_rowvec(
          tape.matmul(tape.relu(tape.add_rowvec(tape.matmul(h1, pn(p + "w1")),
                                                pn(p + "b1"))),
                      pn(p + "w2")),
          pn(p + "b2"));
      if (droprng && cfg.dropout > 0.0) {
        f = tape.mask(f, dropout_mask(cfg.window, d));
      }
      h = tape.add_rowvec(
          tape.mul_rowvec(tape.layernorm_rows(tape.add(h1, f)), pn(p + "ln2_g")),
          pn(p + "ln2_b"));
      check_finite(tape.value(h), "encoder layer " + std::to_string(l));
    }

    Tape::NodeId out_norm =
        tape.add_rowvec(tape.matmul(tape.flatten(h), head_w), head_b);
    Tape::NodeId std_leaf = tape.leaf(state.std);
    Tape::NodeId mean_leaf = tape.leaf(state.mean);
    Tape::NodeId out = tape.add(tape.mul_rowvec(out_norm, std_leaf), mean_leaf);
    check_finite(tape.value(out), "output head");
    if (raw_preds) {
      raw_preds->push_back(tape.value(out).row(0).transpose());
    }

    Tape::NodeId l_pred =
        tape.squared_error(out, batch[s].target.transpose(), 1.0);
    Eigen::MatrixXd acc_target =
        (2.0 * batch[s].prev_mean1 - batch[s].prev_mean2).transpose();
    Tape::NodeId l_acc =
        tape.squared_error(tape.slice_cols(out, 0, 3), acc_target, 1.0);
    Tape::NodeId l = tape.add(l_pred, tape.scale(l_acc, cfg.lambda_acc));
    loss_sum = (loss_sum < 0) ? l : tape.add(loss_sum, l);
  }

  const Tape::NodeId loss =
      tape.scale(loss_sum, 1.0 / static_cast<double>(batch.size()));
  const double value = tape.value(loss)(0, 0);
  if (grads) {
    tape.backward(loss);
    grads->clear();
    grads->reserve(pnodes.size());
    for (Tape::NodeId id : pnodes) grads->push_back(tape.grad(id));
  }
  return value;
}

}  // namespace

Eigen::Matrix<double, 7, 1> forward(const ForecasterModel& model,
                                    const Eigen::MatrixXd& seq) {
  if (seq.rows() != model.config.window || seq.cols() != 7) {
    throw DimensionError("forward: sequence shape does not match the model window");
  }
  check_finite(seq, "input sequence");
  Eigen::MatrixXd window = seq;
  align_quaternion_signs(window);
  auto [normalized, state] = instance_normalize(window);

  // Evaluation mode needs no tape; mirror run_batch's graph directly.
  const ForecasterConfig& cfg = model.config;
  const int d = cfg.d_model;
  const int dh = d / cfg.heads;
  const double attn_scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Eigen::MatrixXd h =
      ((normalized * model.param("embed_w")).rowwise() +
       Eigen::RowVectorXd(model.param("embed_b").row(0))) +
      model.param("pos");
  auto layernorm = [](const Eigen::MatrixXd& x) {
    Eigen::MatrixXd y(x.rows(), x.cols());
    for (int i = 0; i < x.rows(); ++i) {
      const double mean = x.row(i).mean();
      const double var = (x.row(i).array() - mean).square().mean();
      y.row(i) = ((x.row(i).array() - mean) / std::sqrt(var + 1e-5)).matrix();
    }
    return y;
  };
  auto softmax_rows = [](const Eigen::MatrixXd& x) {
    Eigen::MatrixXd y(x.rows(), x.cols());
    for (int i = 0; i < x.rows(); ++i) {
      const Eigen::ArrayXd e = (x.row(i).array() - x.row(i).maxCoeff()).exp();
      y.row(i) = (e / e.sum()).matrix().transpose();
    }
    return y;
  };
  for (int l = 0; l < cfg.layers; ++l) {
    const std::string p = "l" + std::to_string(l) + ".";
    const Eigen::MatrixXd q =
        (h * model.param(p + "wq")).rowwise() +
        Eigen::RowVectorXd(model.param(p + "bq").row(0));
    const Eigen::MatrixXd k =
        (h * model.param(p + "wk")).rowwise() +
        Eigen::RowVectorXd(model.param(p + "bk").row(0));
    const Eigen::MatrixXd v =
        (h * model.param(p + "wv")).rowwise() +
        Eigen::RowVectorXd(model.param(p + "bv").row(0));
    Eigen::MatrixXd att(cfg.window, d);
    for (int hh = 0; hh < cfg.heads; ++hh) {
      const Eigen::MatrixXd qh = q.middleCols(hh * dh, dh);
      const Eigen::MatrixXd kh = k.middleCols(hh * dh, dh);
      const Eigen::MatrixXd vh = v.middleCols(hh * dh, dh);
      att.middleCols(hh * dh, dh) =
          softmax_rows(attn_scale * (qh * kh.transpose())) * vh;
    }
    const Eigen::MatrixXd o =
        (att * model.param(p + "wo")).rowwise() +
        Eigen::RowVectorXd(model.param(p + "bo").row(0));
    check_finite(o, "attention layer " + std::to_string(l));
    Eigen::MatrixXd h1 =
        (layernorm(h + o).array().rowwise() *
         Eigen::RowVectorXd(model.param(p + "ln1_g").row(0)).array())
            .matrix();
    h1.rowwise() += Eigen::RowVectorXd(model.param(p + "ln1_b").row(0));
    const Eigen::MatrixXd f =
        ((((h1 * model.param(p + "w1")).rowwise() +
           Eigen::RowVectorXd(model.param(p + "b1").row(0)))
              .cwiseMax(0.0)) *
         model.param(p + "w2"))
            .rowwise() +
        Eigen::RowVectorXd(model.param(p + "b2").row(0));
    check_finite(f, "feed-forward layer " + std::to_string(l));
    h = (layernorm(h1 + f).array().rowwise() *
         Eigen::RowVectorXd(model.param(p + "ln2_g").row(0)).array())
            .matrix();
    h.rowwise() += Eigen::RowVectorXd(model.param(p + "ln2_b").row(0));
  }
  Eigen::RowVectorXd flat(cfg.window * d);
  for (int i = 0; i < cfg.window; ++i) flat.segment(i * d, d) = h.row(i);
  Eigen::RowVectorXd out_norm =
      flat * model.param("head_w") + Eigen::RowVectorXd(model.param("head_b").row(0));
  Eigen::RowVectorXd out =
      (out_norm.array() * state.std.array()).matrix() + state.mean;
  check_finite(out, "output head");

  Eigen::Matrix<double, 7, 1> pred;
  pred << out(0), out(1), out(2), out(3), out(4), out(5), out(6);
  const double qn = pred.tail<4>().norm();
  if (qn < 1e-12) {
    throw NumericalError("forward: degenerate quaternion prediction");
  }
  pred.tail<4>() /= qn;
  if (pred(3) < 0.0) pred.tail<4>() = -pred.tail<4>();
  return pred;
}

Eigen::Matrix<double, 7, 1> tape_prediction(const ForecasterModel& model,
                                            const Eigen::MatrixXd& seq) {
  Sample s;
  s.input = seq;
  s.target.setZero();
  s.prev_mean1.setZero();
  s.prev_mean2.setZero();
  std::vector<Eigen::Matrix<double, 7, 1>> preds;
  run_batch(model, {s}, {}, nullptr, nullptr, &preds);
  return preds.front();
}

double loss_group(
    const std::vector<Eigen::Matrix<double, 7, 1>>& predictions,
    const std::vector<Eigen::Matrix<double, 7, 1>>& targets,
    const std::vector<std::pair<Eigen::Vector3d, Eigen::Vector3d>>&
        prev_two_means,
    double lambda_acc) {
  if (predictions.size() != targets.size() ||
      predictions.size() != prev_two_means.size() || predictions.empty()) {
    throw DimensionError("loss_group: batch size mismatch or empty batch");
  }
  double l_pred = 0.0, l_acc = 0.0;
  for (size_t i = 0; i < predictions.size(); ++i) {
    l_pred += (predictions[i] - targets[i]).squaredNorm();
    const Eigen::Vector3d mu_hat = predictions[i].head<3>();
    l_acc += (mu_hat - 2.0 * prev_two_means[i].first + prev_two_means[i].second)
                 .squaredNorm();
  }
  const double n = static_cast<double>(predictions.size());
  return l_pred / n + lambda_acc * (l_acc / n);
}

std::vector<Sample> make_samples(const std::vector<Eigen::MatrixXd>& sequences,
                                 int window) {
  std::vector<Sample> samples;
  for (const Eigen::MatrixXd& raw : sequences) {
    if (raw.cols() != 7 || raw.rows() < window + 1) {
      throw DimensionError("make_samples: each sequence must be T x 7 with T >= window+1");
    }
    Eigen::MatrixXd seq = raw;
    align_quaternion_signs(seq);
    for (int t = window; t < seq.rows(); ++t) {
      Sample s;
      s.input = seq.middleRows(t - window, window);
      s.target = seq.row(t).transpose();
      s.prev_mean1 = seq.row(t - 1).head(3).transpose();
      s.prev_mean2 = seq.row(t - 2).head(3).transpose();
      samples.push_back(std::move(s));
    }
  }
  return samples;
}

ForecasterModel train_group(const std::vector<Eigen::MatrixXd>& sequences,
                            const ForecasterConfig& config,
                            TrainReport* report) {
  config.validate();
  if (sequences.empty()) {
    throw ConfigError("train_group: no training sequences");
  }
  std::vector<Sample> samples = make_samples(sequences, config.window);
  ForecasterModel model = init_model(config);

  std::vector<Eigen::MatrixXd> m, v;
  for (const auto& [name, value] : model.params) {
    m.push_back(Eigen::MatrixXd::Zero(value.rows(), value.cols()));
    v.push_back(Eigen::MatrixXd::Zero(value.rows(), value.cols()));
  }
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long step = 0;

  Rng rng(config.seed ^ 0x5bd1e995u);
  std::vector<size_t> order(samples.size());
  std::iota(order.begin(), order.end(), size_t{0});

  TrainReport local;
  TrainReport& rep = report ? *report : local;
  rep.epoch_loss.clear();

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double ratio = mask_ratio_at(config, epoch);
    std::shuffle(order.begin(), order.end(), rng.engine());

    double epoch_loss_sum = 0.0;
    size_t epoch_count = 0;
    for (size_t off = 0; off < order.size(); off += config.batch_size) {
      const size_t n = std::min(static_cast<size_t>(config.batch_size),
                                order.size() - off);
      std::vector<Sample> batch;
      std::vector<std::vector<int>> spans;
      batch.reserve(n);
      spans.reserve(n);
      for (size_t i = 0; i < n; ++i) {
        batch.push_back(samples[order[off + i]]);
        spans.push_back(span_indices(config.window, ratio, rng));
      }
      std::vector<Eigen::MatrixXd> grads;
      const double loss = run_batch(model, batch, spans, &rng, &grads);
      if (!std::isfinite(loss)) {
        rep.final_loss = loss;
        throw NumericalError("train_group: non-finite loss at epoch " +
                             std::to_string(epoch));
      }
      epoch_loss_sum += loss * static_cast<double>(n);
      epoch_count += n;

      ++step;
      const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      for (size_t p = 0; p < model.params.size(); ++p) {
        m[p] = beta1 * m[p] + (1.0 - beta1) * grads[p];
        v[p] = beta2 * v[p].array().matrix() +
               (1.0 - beta2) * grads[p].array().square().matrix();
        model.params[p].second.array() -=
            config.learning_rate * (m[p].array() / bc1) /
            ((v[p].array() / bc2).sqrt() + eps);
      }
    }
    rep.epoch_loss.push_back(epoch_loss_sum / static_cast<double>(epoch_count));
  }
  rep.final_loss = rep.epoch_loss.empty() ? 0.0 : rep.epoch_loss.back();
  return model;
}

double check_model_gradients(const ForecasterModel& model,
                             const std::vector<Sample>& batch, int probes,
                             uint64_t seed) {
  if (batch.empty()) {
    throw ConfigError("check_model_gradients: empty batch");
  }
  std::vector<Eigen::MatrixXd> grads;
  run_batch(model, batch, {}, nullptr, &grads);

  Rng rng(seed);
  ForecasterModel probe = model;
  double worst = 0.0;
  for (int i = 0; i < probes; ++i) {
    const size_t p = rng.index(probe.params.size());
    Eigen::MatrixXd& value = probe.params[p].second;
    const Eigen::Index r = static_cast<Eigen::Index>(rng.index(value.rows()));
    const Eigen::Index c = static_cast<Eigen::Index>(rng.index(value.cols()));
    const double x0 = value(r, c);
    const double h = 1e-5 * std::max(1.0, std::abs(x0));

    value(r, c) = x0 + h;
    const double lp = run_batch(probe, batch, {}, nullptr, nullptr);
    value(r, c) = x0 - h;
    const double lm = run_batch(probe, batch, {}, nullptr, nullptr);
    value(r, c) = x0;

    const double fd = (lp - lm) / (2.0 * h);
    const double an = grads[p](r, c);
    const double denom = std::max(std::abs(an), std::abs(fd));
    if (denom < 1e-8) continue;
    worst = std::max(worst, std::abs(an - fd) / denom);
  }
  return worst;
}

Eigen::MatrixXd rollout(const ForecasterModel& model,
                        const Eigen::MatrixXd& seed_seq, int horizon) {
  if (horizon < 1) {
    throw ConfigError("rollout: horizon must be >= 1");
  }
  if (seed_seq.rows() != model.config.window || seed_seq.cols() != 7) {
    throw DimensionError("rollout: seed sequence shape does not match the model window");
  }
  Eigen::MatrixXd window = seed_seq;
  Eigen::MatrixXd out(horizon, 7);
  for (int h = 0; h < horizon; ++h) {
    const Eigen::Matrix<double, 7, 1> pred = forward(model, window);
    out.row(h) = pred.transpose();
    window.topRows(window.rows() - 1) = window.bottomRows(window.rows() - 1);
    window.row(window.rows() - 1) = pred.transpose();
  }
  return out;
}

TrajectoryTensor forecast_bank(const DynamicScene& scene,
                               const grouping::MemoryBank& bank,
                               const std::map<int, ForecasterModel>& models,
                               int horizon) {
  const TrajectoryTensor observed = scene_trajectories(scene);
  TrajectoryTensor future;
  future.gaussian_ids = observed.gaussian_ids;
  future.start_timestep = observed.start_timestep + observed.length();
  future.values.resize(observed.gaussian_ids.size());

  for (size_t i = 0; i < observed.gaussian_ids.size(); ++i) {
    const GaussianId id = observed.gaussian_ids[i];
    const int group = bank.group_of(id);
    auto it = models.find(group);
    if (it == models.end() && group != -1) {
      throw ConfigError("forecast_bank: no model for group " +
                        std::to_string(group));
    }
    if (it == models.end()) {
      it = models.find(-1);
      if (it == models.end()) {
        throw ConfigError("forecast_bank: unassigned gaussian " +
                          std::to_string(id) + " and no global model");
      }
    }
    const ForecasterModel& model = it->second;
    const int window = model.config.window;
    if (observed.length() < window) {
      throw DimensionError("forecast_bank: observed trajectory shorter than the model window");
    }
    Eigen::MatrixXd seed(window, 7);
    const int offset = observed.length() - window;
    for (int t = 0; t < window; ++t) {
      for (int c = 0; c < 7; ++c) seed(t, c) = observed.values[i][offset + t][c];
    }
    const Eigen::MatrixXd rolled = rollout(model, seed, horizon);
    future.values[i].resize(horizon);
    for (int t = 0; t < horizon; ++t) {
      for (int c = 0; c < 7; ++c) future.values[i][t][c] = rolled(t, c);
    }
  }
  return future;
}

}  // namespace mogaf::forecast
