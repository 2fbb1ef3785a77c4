#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "../../vendor/json.hpp"
#include "core/scene.hpp"
#include "forecast/forecaster.hpp"
#include "grouping/grouping.hpp"
#include "metrics/tracking.hpp"
#include "synth/synth.hpp"

namespace mogaf::io {

// 17 significant digits; round-trips any double through text.
std::string format_double(double value);

nlohmann::json scene_to_json(const DynamicScene& scene);
DynamicScene scene_from_json(const nlohmann::json& j);

nlohmann::json ground_truth_to_json(const synth::GroundTruth& gt);
synth::GroundTruth ground_truth_from_json(const nlohmann::json& j);

nlohmann::json bank_to_json(const grouping::MemoryBank& bank);
grouping::MemoryBank bank_from_json(const nlohmann::json& j);

nlohmann::json report_to_json(const metrics::TrackingReport& report);

nlohmann::json checkpoint_to_json(const forecast::ForecasterModel& model);
forecast::ForecasterModel checkpoint_from_json(const nlohmann::json& j);

// File helpers; failures throw IoError.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::filesystem::path& path);

// CSV with header gaussian_id,t,mx,my,mz,qw,qx,qy,qz; t is absolute.
void write_trajectory_csv(const std::filesystem::path& path,
                          const TrajectoryTensor& traj);
TrajectoryTensor read_trajectory_csv(const std::filesystem::path& path);

// One (epoch, loss) row per entry.
void write_loss_csv(const std::filesystem::path& path,
                    const std::vector<double>& losses);

// Binary PGM rasters plus a JSON index describing every frame.
void write_masks(const std::filesystem::path& dir,
                 const std::vector<synth::MaskFrame>& frames);
std::vector<synth::MaskFrame> read_masks(const std::filesystem::path& dir);

// Canonical means as an ASCII point cloud, colored by group when a bank is
// given (deterministic palette indexed by group).
void write_ply(const std::filesystem::path& path, const DynamicScene& scene,
               const grouping::MemoryBank* bank);

}  // namespace mogaf::io
