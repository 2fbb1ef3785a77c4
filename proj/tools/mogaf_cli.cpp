// Command-line front end. Builds a stage config from a JSON file, MOGAF_*
// environment variables and flags (in that precedence order), then drives
// the shared library through its C interface.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "../vendor/CLI11.hpp"
#include "../vendor/json.hpp"
#include "mogaf/mogaf.h"

namespace {

using nlohmann::json;

struct StageArgs {
  CLI::App* cmd = nullptr;
  std::string stage;
  std::string config_path;
  json values;  // keys set by flags or env, overlaid on the config file
};

// Registers an option that records its parsed value under `key` when given.
template <typename T>
void add_opt(StageArgs& args, const std::string& flag, const std::string& key,
             const std::string& help) {
  auto holder = std::make_shared<T>();
  std::string env = "MOGAF_" + key;
  for (auto& c : env) c = static_cast<char>(std::toupper(c));
  args.cmd
      ->add_option_function<T>(
          flag, [&args, key, holder](const T& v) { args.values[key] = v; }, help)
      ->envname(env);
}

void add_flag_opt(StageArgs& args, const std::string& flag,
                  const std::string& key, const std::string& help) {
  args.cmd->add_flag_callback(
      flag, [&args, key]() { args.values[key] = true; }, help);
}

void add_common(StageArgs& args) {
  args.cmd->add_option("--config", args.config_path,
                       "JSON config file (lowest precedence)");
  add_opt<std::string>(args, "-o,--output", "output_dir", "Output directory");
  add_opt<uint64_t>(args, "--seed", "seed", "Random seed");
  add_opt<int>(args, "--threads", "threads",
               "Worker threads (1 = deterministic mode)");
  add_flag_opt(args, "--dry-run", "dry_run", "Print the resolved plan, write nothing");
}

void add_generate_opts(StageArgs& args) {
  add_opt<std::string>(args, "--preset", "preset",
                       "two-groups | rigid-nonrigid-mix | occlusion-stress");
  args.cmd
      ->add_option_function<std::vector<std::string>>(
          "--groups",
          [&args](const std::vector<std::string>& v) { args.values["groups"] = v; },
          "Group kinds (rigid|nonrigid), one per group")
      ->expected(0, -1);
  add_opt<int>(args, "--gaussians-per-group", "gaussians_per_group", "Gaussians per group");
  add_opt<int>(args, "--timesteps", "timesteps", "Sequence length");
  add_opt<int>(args, "--nonrigid-bases", "nonrigid_bases_per_group",
               "Motion bases per non-rigid group");
  add_opt<double>(args, "--noise-sigma", "noise_sigma", "Trajectory jitter std");
  add_opt<double>(args, "--motion-amplitude", "motion_amplitude", "Motion scale");
  add_opt<double>(args, "--group-separation", "group_separation", "Center spacing");
  add_opt<double>(args, "--object-scale", "object_scale", "Group sampling radius");
  add_opt<int>(args, "--image-width", "image_width", "Mask width in pixels");
  add_opt<int>(args, "--image-height", "image_height", "Mask height in pixels");
  add_opt<double>(args, "--orbit-radius", "orbit_radius", "Camera orbit radius");
  add_opt<double>(args, "--orbit-arc", "orbit_arc", "Camera arc in radians");
  add_opt<double>(args, "--focal", "focal", "Focal length in pixels");
  add_opt<int>(args, "--splat-radius", "splat_radius", "Mask disk radius");
  add_flag_opt(args, "--depth-aligned", "depth_aligned",
               "Stack groups along the view axis");
}

void add_grouping_opts(StageArgs& args) {
  add_opt<double>(args, "--front-fraction", "front_fraction", "Seed depth fraction");
  add_opt<int>(args, "--pca-dims", "pca_dims", "Weight-feature dimensions");
  add_opt<double>(args, "--pca-scale", "pca_scale", "Weight-feature scale");
  add_opt<double>(args, "--radius-multiplier", "radius_multiplier",
                  "Region-growing radius multiplier");
  add_opt<int>(args, "--knn-k", "knn_k", "Neighbors for the adaptive radius");
  add_opt<double>(args, "--overlap-threshold", "overlap_threshold",
                  "Merge gate for mask overlap");
  add_opt<int>(args, "--vote-k", "vote_k", "Neighbors for vote reassignment");
  add_opt<double>(args, "--reassign-fraction", "reassign_fraction",
                  "Committed fraction per vote round");
  add_opt<int>(args, "--keyframe-stride", "keyframe_stride", "Keyframe spacing");
}

void add_optim_opts(StageArgs& args) {
  add_opt<double>(args, "--lambda-rigid", "lambda_rigid", "Rigidity weight");
  add_opt<double>(args, "--lambda-nr", "lambda_nr", "Non-rigid smoothness weight");
  add_opt<double>(args, "--lambda-fit", "lambda_fit", "Data-fit weight");
  add_opt<int>(args, "--nn-count", "nn_count", "Smoothness graph neighbors");
  add_opt<double>(args, "--refine-learning-rate", "refine_learning_rate",
                  "Refinement step size");
  add_opt<int>(args, "--refine-steps", "refine_steps", "Refinement iterations");
  add_opt<int>(args, "--rigid-refresh", "rigid_refresh",
               "Steps between anchor re-fits");
}

void add_forecaster_opts(StageArgs& args) {
  add_opt<int>(args, "--d-model", "d_model", "Hidden width");
  add_opt<int>(args, "--heads", "heads", "Attention heads");
  add_opt<int>(args, "--ff-dim", "ff_dim", "Feed-forward width");
  add_opt<int>(args, "--layers", "layers", "Encoder layers");
  add_opt<double>(args, "--dropout", "dropout", "Dropout rate");
  add_opt<int>(args, "--window", "window", "Input window length");
  add_opt<double>(args, "--lambda-acc", "lambda_acc", "Acceleration weight");
  add_opt<int>(args, "--epochs", "epochs", "Training epochs");
  add_opt<int>(args, "--batch-size", "batch_size", "Batch size");
  add_opt<double>(args, "--learning-rate", "learning_rate", "Optimizer step size");
  add_opt<double>(args, "--mask-start", "mask_start", "Initial masked-span ratio");
  add_opt<double>(args, "--mask-end", "mask_end", "Final masked-span ratio");
}

json build_config(const StageArgs& args, bool forecaster_nested) {
  json cfg = json::object();
  if (!args.config_path.empty()) {
    std::ifstream in(args.config_path);
    if (!in) {
      std::cerr << "error: cannot read config file " << args.config_path << "\n";
      std::exit(MOGAF_ERR_IO);
    }
    try {
      in >> cfg;
    } catch (const json::parse_error& e) {
      std::cerr << "error: invalid config JSON: " << e.what() << "\n";
      std::exit(MOGAF_ERR_CONFIG);
    }
  }
  static const char* forecaster_keys[] = {
      "d_model", "heads",      "ff_dim",        "layers",     "dropout",
      "window",  "lambda_acc", "epochs",        "batch_size", "learning_rate",
      "mask_start", "mask_end"};
  for (const auto& [key, value] : args.values.items()) {
    bool nested = false;
    if (forecaster_nested) {
      for (const char* fk : forecaster_keys) {
        if (key == fk) {
          cfg["forecaster"][key] = value;
          nested = true;
          break;
        }
      }
    }
    if (!nested) cfg[key] = value;
  }
  return cfg;
}

int run_stage(const StageArgs& args, bool forecaster_nested) {
  const json cfg = build_config(args, forecaster_nested);
  mogaf_ctx* ctx = mogaf_ctx_new();
  if (!ctx) {
    std::cerr << "error: out of memory\n";
    return MOGAF_ERR_NUMERIC;
  }
  char* summary = nullptr;
  const int code =
      mogaf_run_stage(ctx, args.stage.c_str(), cfg.dump().c_str(), &summary);
  if (code == MOGAF_OK) {
    if (cfg.value("dry_run", false)) {
      std::cout << summary << "\n";  // resolved plan for inspection
    } else {
      std::cerr << "[" << args.stage << "] ok\n" << summary << "\n";
    }
  } else {
    std::cerr << "error: " << mogaf_last_error(ctx) << "\n";
  }
  mogaf_free_string(summary);
  mogaf_ctx_free(ctx);
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Motion-group scene forecasting pipeline"};
  app.require_subcommand(1);
  std::vector<StageArgs> stages(8);
  const char* names[] = {"generate", "group",    "refine", "train",
                         "forecast", "eval",     "pipeline", "export"};
  const char* helps[] = {
      "Generate a synthetic dynamic scene with masks and ground truth",
      "Build motion groups from a scene and instance masks",
      "Refine group motion against observed trajectories",
      "Train per-group trajectory forecasters",
      "Roll trained forecasters forward over a horizon",
      "Score a forecast against ground truth",
      "Run group -> refine -> train -> forecast -> eval end to end",
      "Export scenes and trajectories as PLY/CSV"};
  for (int i = 0; i < 8; ++i) {
    stages[i].stage = names[i];
    stages[i].cmd = app.add_subcommand(names[i], helps[i]);
    add_common(stages[i]);
  }
  StageArgs& generate = stages[0];
  StageArgs& group = stages[1];
  StageArgs& refine = stages[2];
  StageArgs& train = stages[3];
  StageArgs& forecast = stages[4];
  StageArgs& eval = stages[5];
  StageArgs& pipeline = stages[6];
  StageArgs& exporter = stages[7];

  add_generate_opts(generate);

  add_opt<std::string>(group, "--scene", "scene", "Scene JSON path");
  add_opt<std::string>(group, "--masks", "masks", "Mask directory");
  add_opt<std::string>(group, "--ground-truth", "ground_truth",
                       "Ground-truth JSON (reports label accuracy)");
  add_opt<std::string>(group, "--method", "method", "motion | naive4d");
  add_grouping_opts(group);

  add_opt<std::string>(refine, "--scene", "scene", "Scene JSON path");
  add_opt<std::string>(refine, "--bank", "bank", "Group bank JSON path");
  add_opt<std::string>(refine, "--observed", "observed",
                       "Observed trajectory CSV (defaults to the scene's own)");
  add_optim_opts(refine);

  add_opt<std::string>(train, "--scene", "scene", "Scene JSON path");
  add_opt<std::string>(train, "--bank", "bank", "Group bank JSON path");
  add_flag_opt(train, "--global-only", "global_only",
               "Train a single scene-global model");
  add_forecaster_opts(train);

  add_opt<std::string>(forecast, "--scene", "scene", "Scene JSON path");
  add_opt<std::string>(forecast, "--bank", "bank", "Group bank JSON path");
  add_opt<std::string>(forecast, "--checkpoints", "checkpoints",
                       "Checkpoint directory from the train stage");
  add_opt<int>(forecast, "--horizon", "horizon", "Future steps to roll out");

  add_opt<std::string>(eval, "--pred", "pred", "Predicted trajectory CSV");
  add_opt<std::string>(eval, "--gt", "gt", "Ground-truth trajectory CSV");
  add_opt<std::string>(eval, "--scene", "scene", "Scene JSON (cameras)");
  add_opt<std::string>(eval, "--ground-truth", "ground_truth",
                       "Ground-truth JSON (enables AJ and OA)");
  add_flag_opt(eval, "--emit-plot-data", "emit_plot_data",
               "Write per-horizon error curves");

  add_generate_opts(pipeline);
  add_opt<std::string>(pipeline, "--scene", "scene",
                       "Existing scene JSON (skips generation)");
  add_opt<std::string>(pipeline, "--masks", "masks", "Mask directory");
  add_opt<std::string>(pipeline, "--ground-truth", "ground_truth",
                       "Ground-truth JSON for the existing scene");
  add_opt<int>(pipeline, "--horizon", "horizon", "Held-out future steps");
  add_opt<std::string>(
      pipeline, "--ablate", "ablate",
      "none | no-grouping | no-masking | naive4d | global-forecaster");
  add_grouping_opts(pipeline);
  add_optim_opts(pipeline);
  add_forecaster_opts(pipeline);

  add_opt<std::string>(exporter, "--scene", "scene", "Scene JSON path");
  add_opt<std::string>(exporter, "--bank", "bank",
                       "Group bank JSON (colors the PLY by group)");
  add_opt<std::string>(exporter, "--format", "format", "ply | csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : MOGAF_ERR_CONFIG;
  }

  for (auto& stage : stages) {
    if (stage.cmd->parsed()) {
      return run_stage(stage, stage.stage == "pipeline");
    }
  }
  return MOGAF_ERR_CONFIG;
}
