#include "pipeline/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "core/errors.hpp"
#include "forecast/forecaster.hpp"
#include "grouping/grouping.hpp"
#include "io/serialize.hpp"
#include "metrics/tracking.hpp"
#include "optim/refine.hpp"
#include "synth/synth.hpp"

namespace mogaf::pipeline {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

fs::path output_dir(const json& cfg) {
  if (!cfg.contains("output_dir")) {
    throw ConfigError("config: output_dir is required");
  }
  return fs::path(cfg.at("output_dir").get<std::string>());
}

bool dry_run(const json& cfg) { return cfg.value("dry_run", false); }

void write_resolved(const json& cfg, const fs::path& dir,
                    const std::string& stage, const json& resolved) {
  if (dry_run(cfg)) return;
  io::write_json_file(dir / ("resolved_config_" + stage + ".json"), resolved);
}

synth::SynthConfig synth_config_from(const json& cfg) {
  synth::SynthConfig sc;
  if (cfg.contains("preset")) {
    sc = synth::preset_config(cfg.at("preset").get<std::string>(),
                              cfg.value("seed", uint64_t{0}));
  }
  if (cfg.contains("groups")) {
    sc.group_kinds.clear();
    for (const auto& kind : cfg.at("groups")) {
      const std::string name = kind.get<std::string>();
      if (name == "rigid") {
        sc.group_kinds.push_back(synth::GroupKind::kRigid);
      } else if (name == "nonrigid") {
        sc.group_kinds.push_back(synth::GroupKind::kNonRigid);
      } else {
        throw ConfigError("generate: unknown group kind " + name);
      }
    }
  }
  sc.gaussians_per_group = cfg.value("gaussians_per_group", sc.gaussians_per_group);
  sc.nonrigid_bases_per_group =
      cfg.value("nonrigid_bases_per_group", sc.nonrigid_bases_per_group);
  sc.num_timesteps = cfg.value("timesteps", sc.num_timesteps);
  sc.image_width = cfg.value("image_width", sc.image_width);
  sc.image_height = cfg.value("image_height", sc.image_height);
  sc.orbit_radius = cfg.value("orbit_radius", sc.orbit_radius);
  sc.orbit_height = cfg.value("orbit_height", sc.orbit_height);
  sc.orbit_arc = cfg.value("orbit_arc", sc.orbit_arc);
  sc.focal = cfg.value("focal", sc.focal);
  sc.group_separation = cfg.value("group_separation", sc.group_separation);
  sc.object_scale = cfg.value("object_scale", sc.object_scale);
  sc.motion_amplitude = cfg.value("motion_amplitude", sc.motion_amplitude);
  sc.noise_sigma = cfg.value("noise_sigma", sc.noise_sigma);
  sc.splat_radius = cfg.value("splat_radius", sc.splat_radius);
  sc.depth_aligned_layout = cfg.value("depth_aligned", sc.depth_aligned_layout);
  sc.seed = cfg.value("seed", sc.seed);
  sc.validate();
  return sc;
}

json synth_config_to_json(const synth::SynthConfig& sc) {
  json groups = json::array();
  for (auto kind : sc.group_kinds) {
    groups.push_back(kind == synth::GroupKind::kRigid ? "rigid" : "nonrigid");
  }
  return {{"groups", std::move(groups)},
          {"gaussians_per_group", sc.gaussians_per_group},
          {"nonrigid_bases_per_group", sc.nonrigid_bases_per_group},
          {"timesteps", sc.num_timesteps},
          {"image_width", sc.image_width},
          {"image_height", sc.image_height},
          {"orbit_radius", sc.orbit_radius},
          {"orbit_height", sc.orbit_height},
          {"orbit_arc", sc.orbit_arc},
          {"focal", sc.focal},
          {"group_separation", sc.group_separation},
          {"object_scale", sc.object_scale},
          {"motion_amplitude", sc.motion_amplitude},
          {"noise_sigma", sc.noise_sigma},
          {"splat_radius", sc.splat_radius},
          {"depth_aligned", sc.depth_aligned_layout},
          {"seed", sc.seed}};
}

grouping::GroupingParams grouping_params_from(const json& cfg) {
  grouping::GroupingParams p;
  p.front_fraction = cfg.value("front_fraction", p.front_fraction);
  p.pca_dims = cfg.value("pca_dims", p.pca_dims);
  p.pca_scale = cfg.value("pca_scale", p.pca_scale);
  p.radius_multiplier = cfg.value("radius_multiplier", p.radius_multiplier);
  p.knn_k = cfg.value("knn_k", p.knn_k);
  p.overlap_threshold = cfg.value("overlap_threshold", p.overlap_threshold);
  p.vote_k = cfg.value("vote_k", p.vote_k);
  p.reassign_fraction = cfg.value("reassign_fraction", p.reassign_fraction);
  p.keyframe_stride = cfg.value("keyframe_stride", p.keyframe_stride);
  p.gate_keyframe_merge = cfg.value("gate_keyframe_merge", p.gate_keyframe_merge);
  p.validate();
  return p;
}

json grouping_params_to_json(const grouping::GroupingParams& p) {
  return {{"front_fraction", p.front_fraction},
          {"pca_dims", p.pca_dims},
          {"pca_scale", p.pca_scale},
          {"radius_multiplier", p.radius_multiplier},
          {"knn_k", p.knn_k},
          {"overlap_threshold", p.overlap_threshold},
          {"vote_k", p.vote_k},
          {"reassign_fraction", p.reassign_fraction},
          {"keyframe_stride", p.keyframe_stride},
          {"gate_keyframe_merge", p.gate_keyframe_merge}};
}

optim::OptimParams optim_params_from(const json& cfg) {
  optim::OptimParams p;
  p.lambda_rigid = cfg.value("lambda_rigid", p.lambda_rigid);
  p.lambda_nr = cfg.value("lambda_nr", p.lambda_nr);
  p.lambda_fit = cfg.value("lambda_fit", p.lambda_fit);
  p.nn_count = cfg.value("nn_count", p.nn_count);
  p.learning_rate = cfg.value("refine_learning_rate", p.learning_rate);
  p.steps = cfg.value("refine_steps", p.steps);
  p.tolerance = cfg.value("refine_tolerance", p.tolerance);
  p.rigid_refresh = cfg.value("rigid_refresh", p.rigid_refresh);
  p.validate();
  return p;
}

json optim_params_to_json(const optim::OptimParams& p) {
  return {{"lambda_rigid", p.lambda_rigid},
          {"lambda_nr", p.lambda_nr},
          {"lambda_fit", p.lambda_fit},
          {"nn_count", p.nn_count},
          {"refine_learning_rate", p.learning_rate},
          {"refine_steps", p.steps},
          {"refine_tolerance", p.tolerance},
          {"rigid_refresh", p.rigid_refresh}};
}

forecast::ForecasterConfig forecaster_config_from(const json& cfg,
                                                  int obs_timesteps) {
  forecast::ForecasterConfig c;
  c.window = std::min(obs_timesteps - 1, 32);
  c.d_model = cfg.value("d_model", c.d_model);
  c.heads = cfg.value("heads", c.heads);
  c.ff_dim = cfg.value("ff_dim", c.ff_dim);
  c.layers = cfg.value("layers", c.layers);
  c.dropout = cfg.value("dropout", c.dropout);
  c.window = cfg.value("window", c.window);
  c.lambda_acc = cfg.value("lambda_acc", c.lambda_acc);
  c.epochs = cfg.value("epochs", c.epochs);
  c.batch_size = cfg.value("batch_size", c.batch_size);
  c.learning_rate = cfg.value("learning_rate", c.learning_rate);
  c.mask_start = cfg.value("mask_start", c.mask_start);
  c.mask_end = cfg.value("mask_end", c.mask_end);
  c.seed = cfg.value("seed", c.seed);
  c.validate();
  return c;
}

json forecaster_config_to_json(const forecast::ForecasterConfig& c) {
  return {{"d_model", c.d_model},       {"heads", c.heads},
          {"ff_dim", c.ff_dim},         {"layers", c.layers},
          {"dropout", c.dropout},       {"window", c.window},
          {"lambda_acc", c.lambda_acc}, {"epochs", c.epochs},
          {"batch_size", c.batch_size}, {"learning_rate", c.learning_rate},
          {"mask_start", c.mask_start}, {"mask_end", c.mask_end},
          {"seed", c.seed}};
}

std::vector<synth::MaskFrame> rasterize_all(const DynamicScene& scene,
                                            const synth::GroundTruth& gt,
                                            int splat_radius) {
  std::vector<synth::MaskFrame> frames;
  frames.reserve(scene.num_timesteps());
  for (int t = 0; t < scene.num_timesteps(); ++t) {
    frames.push_back(synth::rasterize_masks(scene, gt, t, splat_radius));
  }
  return frames;
}

// Trajectory window [t0, t0+len) of a tensor that starts at timestep 0.
TrajectoryTensor slice_trajectories(const TrajectoryTensor& traj, int t0,
                                    int len) {
  if (t0 < 0 || len < 1 || t0 + len > traj.length()) {
    throw ConfigError("trajectory slice out of range");
  }
  TrajectoryTensor out;
  out.gaussian_ids = traj.gaussian_ids;
  out.start_timestep = traj.start_timestep + t0;
  out.values.reserve(traj.values.size());
  for (const auto& seq : traj.values) {
    out.values.emplace_back(seq.begin() + t0, seq.begin() + t0 + len);
  }
  return out;
}

// Per-gaussian T x 7 matrices for the given member set, scene order.
std::vector<Eigen::MatrixXd> member_sequences(const TrajectoryTensor& traj,
                                              const std::set<GaussianId>* members) {
  std::vector<Eigen::MatrixXd> sequences;
  for (size_t i = 0; i < traj.gaussian_ids.size(); ++i) {
    if (members && !members->count(traj.gaussian_ids[i])) continue;
    Eigen::MatrixXd seq(traj.length(), 7);
    for (int t = 0; t < traj.length(); ++t) {
      for (int c = 0; c < 7; ++c) seq(t, c) = traj.values[i][t][c];
    }
    sequences.push_back(std::move(seq));
  }
  return sequences;
}

grouping::MemoryBank single_group_bank(const DynamicScene& scene) {
  grouping::MotionGroup all;
  all.tau = 0;
  for (const auto& g : scene.gaussians) all.member_ids.insert(g.id);
  grouping::MemoryBank bank;
  bank.groups.push_back(std::move(all));
  return bank;
}

// Core stages shared by the file-based entry points and run_pipeline.

grouping::MemoryBank group_core(const DynamicScene& scene,
                                const std::vector<synth::MaskFrame>& masks,
                                const grouping::GroupingParams& params,
                                const std::string& method) {
  if (method == "motion") return grouping::group_scene(scene, masks, params);
  if (method == "naive4d") return grouping::group_naive4d(scene, masks, params);
  throw ConfigError("group: unknown method " + method);
}

std::map<int, forecast::ForecasterModel> train_core(
    const DynamicScene& scene, const grouping::MemoryBank& bank,
    const forecast::ForecasterConfig& base_cfg, bool global_only,
    std::map<int, forecast::TrainReport>* reports) {
  const TrajectoryTensor traj = scene_trajectories(scene);
  std::map<int, forecast::ForecasterModel> models;

  std::set<GaussianId> unassigned;
  for (const auto& g : scene.gaussians) {
    if (bank.group_of(g.id) < 0) unassigned.insert(g.id);
  }

  if (!global_only) {
    for (size_t k = 0; k < bank.groups.size(); ++k) {
      forecast::ForecasterConfig cfg = base_cfg;
      cfg.seed = base_cfg.seed + k + 1;
      forecast::TrainReport report;
      models.emplace(
          static_cast<int>(k),
          forecast::train_group(
              member_sequences(traj, &bank.groups[k].member_ids), cfg, &report));
      if (reports) (*reports)[static_cast<int>(k)] = std::move(report);
    }
  }
  if (global_only || !unassigned.empty()) {
    forecast::ForecasterConfig cfg = base_cfg;
    forecast::TrainReport report;
    models.emplace(-1,
                   forecast::train_group(member_sequences(traj, nullptr), cfg,
                                         &report));
    if (reports) (*reports)[-1] = std::move(report);
  }
  return models;
}

json report_summary(const metrics::TrackingReport& report) {
  return io::report_to_json(report);
}

std::string report_table(const metrics::TrackingReport& report) {
  std::ostringstream out;
  out << "metric        value\n";
  out << "epe           " << report.epe << "\n";
  out << "delta3d_10    " << report.delta3d_10 << "\n";
  out << "delta3d_05    " << report.delta3d_05 << "\n";
  out << "aj            " << (report.aj ? std::to_string(*report.aj) : "n/a") << "\n";
  out << "delta_avg_2d  " << report.delta_avg_2d << "\n";
  out << "oa            " << (report.oa ? std::to_string(*report.oa) : "n/a") << "\n";
  out << "points        " << report.evaluated_points << "\n";
  return out.str();
}

metrics::OcclusionFlags occlusion_window(const synth::GroundTruth& gt, int t0,
                                         int len) {
  metrics::OcclusionFlags flags;
  flags.reserve(gt.occlusion.size());
  for (const auto& row : gt.occlusion) {
    std::vector<bool> slice;
    slice.reserve(len);
    for (int t = t0; t < t0 + len; ++t) slice.push_back(row[t] != 0);
    flags.push_back(std::move(slice));
  }
  return flags;
}

// Per-horizon mean EPE rows for plotting.
void write_horizon_csv(const fs::path& path, const TrajectoryTensor& pred,
                       const TrajectoryTensor& gt) {
  std::vector<double> rows;
  for (int t = 0; t < pred.length(); ++t) {
    const TrajectoryTensor p1 = slice_trajectories(pred, t, 1);
    const TrajectoryTensor g1 = slice_trajectories(gt, t, 1);
    rows.push_back(metrics::epe_3d(p1, g1));
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "horizon,epe\n";
  for (size_t t = 0; t < rows.size(); ++t) {
    out << (t + 1) << "," << io::format_double(rows[t]) << "\n";
  }
}

}  // namespace

json run_generate(const json& cfg) {
  const synth::SynthConfig sc = synth_config_from(cfg);
  const fs::path dir = output_dir(cfg);
  json resolved = synth_config_to_json(sc);
  resolved["output_dir"] = dir.string();

  json summary = {{"stage", "generate"}, {"resolved", resolved}};
  if (dry_run(cfg)) {
    summary["dry_run"] = true;
    return summary;
  }
  fs::create_directories(dir);

  auto [scene, gt] = synth::generate_scene(sc);
  io::write_json_file(dir / "scene.json", io::scene_to_json(scene));
  io::write_json_file(dir / "ground_truth.json", io::ground_truth_to_json(gt));
  io::write_masks(dir / "masks", rasterize_all(scene, gt, sc.splat_radius));
  io::write_trajectory_csv(dir / "trajectories_gt.csv", scene_trajectories(scene));
  write_resolved(cfg, dir, "generate", resolved);

  summary["outputs"] = {{"scene", (dir / "scene.json").string()},
                        {"ground_truth", (dir / "ground_truth.json").string()},
                        {"masks", (dir / "masks").string()},
                        {"trajectories", (dir / "trajectories_gt.csv").string()}};
  summary["gaussians"] = scene.gaussians.size();
  summary["timesteps"] = scene.num_timesteps();
  return summary;
}

json run_group(const json& cfg) {
  const grouping::GroupingParams params = grouping_params_from(cfg);
  const std::string method = cfg.value("method", std::string("motion"));
  const fs::path dir = output_dir(cfg);
  json resolved = grouping_params_to_json(params);
  resolved["method"] = method;
  resolved["output_dir"] = dir.string();

  json summary = {{"stage", "group"}, {"resolved", resolved}};
  if (dry_run(cfg)) {
    summary["dry_run"] = true;
    return summary;
  }
  const DynamicScene scene = io::scene_from_json(
      io::read_json_file(cfg.at("scene").get<std::string>()));
  const auto masks = io::read_masks(cfg.at("masks").get<std::string>());
  const grouping::MemoryBank bank = group_core(scene, masks, params, method);

  fs::create_directories(dir);
  io::write_json_file(dir / "bank.json", io::bank_to_json(bank));
  write_resolved(cfg, dir, "group", resolved);

  summary["outputs"] = {{"bank", (dir / "bank.json").string()}};
  summary["groups"] = bank.groups.size();
  if (cfg.contains("ground_truth")) {
    const synth::GroundTruth gt = io::ground_truth_from_json(
        io::read_json_file(cfg.at("ground_truth").get<std::string>()));
    summary["label_accuracy"] = grouping::label_accuracy(bank, scene, gt);
  }
  return summary;
}

json run_refine(const json& cfg) {
  const optim::OptimParams params = optim_params_from(cfg);
  const fs::path dir = output_dir(cfg);
  json resolved = optim_params_to_json(params);
  resolved["output_dir"] = dir.string();

  json summary = {{"stage", "refine"}, {"resolved", resolved}};
  if (dry_run(cfg)) {
    summary["dry_run"] = true;
    return summary;
  }
  const DynamicScene scene = io::scene_from_json(
      io::read_json_file(cfg.at("scene").get<std::string>()));
  const grouping::MemoryBank bank = io::bank_from_json(
      io::read_json_file(cfg.at("bank").get<std::string>()));
  const TrajectoryTensor observed =
      cfg.contains("observed")
          ? io::read_trajectory_csv(cfg.at("observed").get<std::string>())
          : scene_trajectories(scene);

  auto [refined, report] = optim::refine(scene, bank, observed, params);
  fs::create_directories(dir);
  io::write_json_file(dir / "scene_refined.json", io::scene_to_json(refined));
  io::write_loss_csv(dir / "refine_loss.csv", report.total_loss);
  write_resolved(cfg, dir, "refine", resolved);

  summary["outputs"] = {{"scene", (dir / "scene_refined.json").string()},
                        {"loss_csv", (dir / "refine_loss.csv").string()}};
  summary["accepted_steps"] = report.accepted_steps;
  if (!report.total_loss.empty()) {
    summary["initial_loss"] = report.total_loss.front();
    summary["final_loss"] = report.total_loss.back();
  }
  return summary;
}

json run_train(const json& cfg) {
  const fs::path dir = output_dir(cfg);
  json summary = {{"stage", "train"}};
  const bool global_only = cfg.value("global_only", false);

  const DynamicScene scene = io::scene_from_json(
      io::read_json_file(cfg.at("scene").get<std::string>()));
  const grouping::MemoryBank bank = io::bank_from_json(
      io::read_json_file(cfg.at("bank").get<std::string>()));
  const forecast::ForecasterConfig base_cfg =
      forecaster_config_from(cfg, scene.num_timesteps());

  json resolved = forecaster_config_to_json(base_cfg);
  resolved["global_only"] = global_only;
  resolved["output_dir"] = dir.string();
  summary["resolved"] = resolved;
  if (dry_run(cfg)) {
    summary["dry_run"] = true;
    return summary;
  }

  std::map<int, forecast::TrainReport> reports;
  const auto models = train_core(scene, bank, base_cfg, global_only, &reports);

  fs::create_directories(dir / "checkpoints");
  json outputs = json::object();
  for (const auto& [k, model] : models) {
    const std::string tag = k < 0 ? "global" : "g" + std::to_string(k);
    const fs::path ckpt = dir / "checkpoints" / ("checkpoint_" + tag + ".json");
    io::write_json_file(ckpt, io::checkpoint_to_json(model));
    io::write_loss_csv(dir / ("train_loss_" + tag + ".csv"),
                       reports.at(k).epoch_loss);
    outputs[tag] = ckpt.string();
  }
  write_resolved(cfg, dir, "train", resolved);
  summary["outputs"] = std::move(outputs);
  return summary;
}

json run_forecast(const json& cfg) {
  const fs::path dir = output_dir(cfg);
  const int horizon = cfg.value("horizon", 8);
  json resolved = {{"horizon", horizon}, {"output_dir", dir.string()}};
  json summary = {{"stage", "forecast"}, {"resolved", resolved}};
  if (dry_run(cfg)) {
    summary["dry_run"] = true;
    return summary;
  }
  const DynamicScene scene = io::scene_from_json(
      io::read_json_file(cfg.at("scene").get<std::string>()));
  const grouping::MemoryBank bank = io::bank_from_json(
      io::read_json_file(cfg.at("bank").get<std::string>()));

  std::map<int, forecast::ForecasterModel> models;
  const fs::path ckpt_dir(cfg.at("checkpoints").get<std::string>());
  for (size_t k = 0; k < bank.groups.size(); ++k) {
    const fs::path p = ckpt_dir / ("checkpoint_g" + std::to_string(k) + ".json");
    if (fs::exists(p)) {
      models.emplace(static_cast<int>(k),
                     io::checkpoint_from_json(io::read_json_file(p)));
    }
  }
  const fs::path global = ckpt_dir / "checkpoint_global.json";
  if (fs::exists(global)) {
    models.emplace(-1, io::checkpoint_from_json(io::read_json_file(global)));
  }

  const TrajectoryTensor future =
      forecast::forecast_bank(scene, bank, models, horizon);
  fs::create_directories(dir);
  io::write_trajectory_csv(dir / "forecast.csv", future);
  write_resolved(cfg, dir, "forecast", resolved);
  summary["outputs"] = {{"forecast", (dir / "forecast.csv").string()}};
  return summary;
}

json run_eval(const json& cfg) {
  const fs::path dir = output_dir(cfg);
  json resolved = {{"emit_plot_data", cfg.value("emit_plot_data", false)},
                   {"output_dir", dir.string()}};
  json summary = {{"stage", "eval"}, {"resolved", resolved}};
  if (dry_run(cfg)) {
    summary["dry_run"] = true;
    return summary;
  }
  const TrajectoryTensor pred =
      io::read_trajectory_csv(cfg.at("pred").get<std::string>());
  TrajectoryTensor gt =
      io::read_trajectory_csv(cfg.at("gt").get<std::string>());
  const DynamicScene scene = io::scene_from_json(
      io::read_json_file(cfg.at("scene").get<std::string>()));

  if (gt.start_timestep != pred.start_timestep && gt.start_timestep == 0) {
    gt = slice_trajectories(gt, pred.start_timestep, pred.length());
  }
  if (pred.start_timestep + pred.length() >
      static_cast<int>(scene.cameras.size())) {
    throw ConfigError("eval: scene lacks cameras for the evaluated window");
  }
  const std::vector<Camera> cameras(
      scene.cameras.begin() + pred.start_timestep,
      scene.cameras.begin() + pred.start_timestep + pred.length());

  metrics::OcclusionFlags occlusion;
  const metrics::OcclusionFlags* occlusion_ptr = nullptr;
  if (cfg.contains("ground_truth")) {
    const synth::GroundTruth truth = io::ground_truth_from_json(
        io::read_json_file(cfg.at("ground_truth").get<std::string>()));
    occlusion = occlusion_window(truth, pred.start_timestep, pred.length());
    occlusion_ptr = &occlusion;
  }

  const metrics::TrackingReport report =
      metrics::evaluate(pred, gt, cameras, occlusion_ptr);
  fs::create_directories(dir);
  io::write_json_file(dir / "report.json", report_summary(report));
  {
    std::ofstream out(dir / "report.txt");
    if (!out) throw IoError("cannot open for writing: " + (dir / "report.txt").string());
    out << report_table(report);
  }
  if (cfg.value("emit_plot_data", false)) {
    write_horizon_csv(dir / "epe_by_horizon.csv", pred, gt);
  }
  write_resolved(cfg, dir, "eval", resolved);
  summary["outputs"] = {{"report", (dir / "report.json").string()}};
  summary["report"] = report_summary(report);
  return summary;
}

json run_pipeline(const json& cfg) {
  const fs::path dir = output_dir(cfg);
  const std::string ablate = cfg.value("ablate", std::string("none"));
  if (ablate != "none" && ablate != "no-grouping" && ablate != "no-masking" &&
      ablate != "naive4d" && ablate != "global-forecaster") {
    throw ConfigError("pipeline: unknown ablation " + ablate);
  }
  const int horizon = cfg.value("horizon", 8);
  if (horizon < 1) throw ConfigError("pipeline: horizon must be >= 1");

  json resolved = {{"ablate", ablate},
                   {"horizon", horizon},
                   {"output_dir", dir.string()},
                   {"grouping", grouping_params_to_json(grouping_params_from(cfg))},
                   {"optim", optim_params_to_json(optim_params_from(cfg))}};
  const bool generate_here = !cfg.contains("scene");
  if (generate_here) resolved["generate"] = synth_config_to_json(synth_config_from(cfg));

  json summary = {{"stage", "pipeline"}, {"resolved", resolved}};
  if (dry_run(cfg)) {
    summary["dry_run"] = true;
    return summary;
  }
  fs::create_directories(dir);

  // Inputs: generated in place or loaded from earlier artifacts.
  DynamicScene scene;
  synth::GroundTruth gt;
  std::vector<synth::MaskFrame> masks;
  if (generate_here) {
    const synth::SynthConfig sc = synth_config_from(cfg);
    std::tie(scene, gt) = synth::generate_scene(sc);
    masks = rasterize_all(scene, gt, sc.splat_radius);
    io::write_json_file(dir / "scene.json", io::scene_to_json(scene));
    io::write_json_file(dir / "ground_truth.json", io::ground_truth_to_json(gt));
  } else {
    scene = io::scene_from_json(
        io::read_json_file(cfg.at("scene").get<std::string>()));
    gt = io::ground_truth_from_json(
        io::read_json_file(cfg.at("ground_truth").get<std::string>()));
    masks = io::read_masks(cfg.at("masks").get<std::string>());
  }

  const int t_total = scene.num_timesteps();
  const int t_obs = t_total - horizon;
  if (t_obs < 5) {
    throw ConfigError("pipeline: need at least 5 observed timesteps before the horizon");
  }
  const DynamicScene observed_scene = scene_prefix(scene, t_obs);
  std::vector<synth::MaskFrame> observed_masks;
  for (const auto& frame : masks) {
    if (frame.t < t_obs) observed_masks.push_back(frame);
  }

  // Stage 1: grouping.
  grouping::MemoryBank bank;
  if (ablate == "no-grouping") {
    bank = single_group_bank(observed_scene);
  } else {
    const std::string method = ablate == "naive4d" ? "naive4d" : "motion";
    bank = group_core(observed_scene, observed_masks,
                      grouping_params_from(cfg), method);
  }
  io::write_json_file(dir / "bank.json", io::bank_to_json(bank));
  summary["label_accuracy"] = grouping::label_accuracy(bank, observed_scene, gt);

  // Stage 2: group-wise motion refinement against the observed trajectories.
  const TrajectoryTensor observed = scene_trajectories(observed_scene);
  auto [refined, refine_report] =
      optim::refine(observed_scene, bank, observed, optim_params_from(cfg));
  io::write_json_file(dir / "scene_refined.json", io::scene_to_json(refined));
  io::write_loss_csv(dir / "refine_loss.csv", refine_report.total_loss);

  // Stage 3: forecaster training.
  forecast::ForecasterConfig fc =
      forecaster_config_from(cfg.value("forecaster", json::object()), t_obs);
  fc.seed = cfg.value("seed", uint64_t{0});
  if (ablate == "no-masking") {
    fc.mask_start = 0.0;
    fc.mask_end = 0.0;
  }
  resolved["forecaster"] = forecaster_config_to_json(fc);
  summary["resolved"] = resolved;

  const bool global_only =
      ablate == "global-forecaster" || ablate == "no-grouping";
  const grouping::MemoryBank forecast_bank_view =
      global_only ? grouping::MemoryBank{} : bank;
  std::map<int, forecast::TrainReport> train_reports;
  const auto models =
      train_core(refined, forecast_bank_view, fc, global_only, &train_reports);
  for (const auto& [k, report] : train_reports) {
    const std::string tag = k < 0 ? "global" : "g" + std::to_string(k);
    io::write_loss_csv(dir / ("train_loss_" + tag + ".csv"), report.epoch_loss);
  }

  // Stage 4: rollout over the future window.
  const TrajectoryTensor future =
      forecast::forecast_bank(refined, forecast_bank_view, models, horizon);
  io::write_trajectory_csv(dir / "forecast.csv", future);

  // Stage 5: evaluation against the held-out ground truth.
  const TrajectoryTensor gt_future =
      slice_trajectories(scene_trajectories(scene), t_obs, horizon);
  io::write_trajectory_csv(dir / "gt_future.csv", gt_future);
  const std::vector<Camera> cameras(scene.cameras.begin() + t_obs,
                                    scene.cameras.end());
  metrics::OcclusionFlags occlusion;
  const metrics::OcclusionFlags* occlusion_ptr = nullptr;
  if (!gt.occlusion.empty()) {
    occlusion = occlusion_window(gt, t_obs, horizon);
    occlusion_ptr = &occlusion;
  }
  const metrics::TrackingReport report =
      metrics::evaluate(future, gt_future, cameras, occlusion_ptr);
  io::write_json_file(dir / "report.json", report_summary(report));
  {
    std::ofstream out(dir / "report.txt");
    if (!out) throw IoError("cannot open for writing: " + (dir / "report.txt").string());
    out << report_table(report);
  }
  write_resolved(cfg, dir, "pipeline", resolved);

  summary["observed_timesteps"] = t_obs;
  summary["report"] = report_summary(report);
  summary["outputs"] = {{"report", (dir / "report.json").string()},
                        {"forecast", (dir / "forecast.csv").string()},
                        {"bank", (dir / "bank.json").string()}};
  return summary;
}

json run_export(const json& cfg) {
  const std::string format = cfg.value("format", std::string("ply"));
  const fs::path dir = output_dir(cfg);
  json resolved = {{"format", format}, {"output_dir", dir.string()}};
  json summary = {{"stage", "export"}, {"resolved", resolved}};
  if (format != "ply" && format != "csv") {
    throw ConfigError("export: unknown format " + format);
  }
  if (dry_run(cfg)) {
    summary["dry_run"] = true;
    return summary;
  }
  const DynamicScene scene = io::scene_from_json(
      io::read_json_file(cfg.at("scene").get<std::string>()));
  fs::create_directories(dir);
  if (format == "ply") {
    grouping::MemoryBank bank;
    const bool with_bank = cfg.contains("bank");
    if (with_bank) {
      bank = io::bank_from_json(
          io::read_json_file(cfg.at("bank").get<std::string>()));
    }
    io::write_ply(dir / "scene.ply", scene, with_bank ? &bank : nullptr);
    summary["outputs"] = {{"ply", (dir / "scene.ply").string()}};
  } else {
    io::write_trajectory_csv(dir / "trajectories.csv", scene_trajectories(scene));
    summary["outputs"] = {{"csv", (dir / "trajectories.csv").string()}};
  }
  write_resolved(cfg, dir, "export", resolved);
  return summary;
}

json run_stage(const std::string& stage, const json& cfg) {
  if (stage == "generate") return run_generate(cfg);
  if (stage == "group") return run_group(cfg);
  if (stage == "refine") return run_refine(cfg);
  if (stage == "train") return run_train(cfg);
  if (stage == "forecast") return run_forecast(cfg);
  if (stage == "eval") return run_eval(cfg);
  if (stage == "pipeline") return run_pipeline(cfg);
  if (stage == "export") return run_export(cfg);
  throw ConfigError("unknown stage: " + stage);
}

}  // namespace mogaf::pipeline
