#pragma once

#include <string>

#include "../../vendor/json.hpp"

namespace mogaf::pipeline {

// Each stage consumes a flat JSON config (already merged from file, env and
// flags by the caller), writes its artifacts plus a resolved-config JSON to
// the output directory, and returns a machine-readable summary. With
// "dry_run": true the resolved plan is returned and nothing is written.

nlohmann::json run_generate(const nlohmann::json& cfg);
nlohmann::json run_group(const nlohmann::json& cfg);
nlohmann::json run_refine(const nlohmann::json& cfg);
nlohmann::json run_train(const nlohmann::json& cfg);
nlohmann::json run_forecast(const nlohmann::json& cfg);
nlohmann::json run_eval(const nlohmann::json& cfg);
nlohmann::json run_pipeline(const nlohmann::json& cfg);
nlohmann::json run_export(const nlohmann::json& cfg);

// Dispatch by stage name; unknown stage throws ConfigError.
nlohmann::json run_stage(const std::string& stage, const nlohmann::json& cfg);

}  // namespace mogaf::pipeline
