#include "mogaf/mogaf.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "core/errors.hpp"
#include "pipeline/pipeline.hpp"

struct mogaf_ctx {
  std::string last_error;
};

namespace {

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

int run(mogaf_ctx* ctx, const char* stage, const char* config_json,
        char** out_summary_json) {
  if (!ctx) return MOGAF_ERR_CONFIG;
  ctx->last_error.clear();
  if (out_summary_json) *out_summary_json = nullptr;
  if (!stage || !config_json) {
    ctx->last_error = "stage and config_json must be non-null";
    return MOGAF_ERR_CONFIG;
  }
  try {
    nlohmann::json cfg;
    try {
      cfg = nlohmann::json::parse(config_json);
    } catch (const nlohmann::json::parse_error& e) {
      throw mogaf::ConfigError(std::string("invalid config JSON: ") + e.what());
    }
    const nlohmann::json summary = mogaf::pipeline::run_stage(stage, cfg);
    if (out_summary_json) *out_summary_json = dup_string(summary.dump(2));
    return MOGAF_OK;
  } catch (const mogaf::ConfigError& e) {
    ctx->last_error = e.what();
    return MOGAF_ERR_CONFIG;
  } catch (const mogaf::IoError& e) {
    ctx->last_error = e.what();
    return MOGAF_ERR_IO;
  } catch (const mogaf::NumericalError& e) {
    ctx->last_error = e.what();
    return MOGAF_ERR_NUMERIC;
  } catch (const nlohmann::json::exception& e) {
    ctx->last_error = std::string("config: ") + e.what();
    return MOGAF_ERR_CONFIG;
  } catch (const std::exception& e) {
    ctx->last_error = e.what();
    return MOGAF_ERR_NUMERIC;
  }
}

}  // namespace

extern "C" {

mogaf_ctx* mogaf_ctx_new(void) { return new (std::nothrow) mogaf_ctx(); }

void mogaf_ctx_free(mogaf_ctx* ctx) { delete ctx; }

const char* mogaf_last_error(const mogaf_ctx* ctx) {
  return ctx ? ctx->last_error.c_str() : "null context";
}

const char* mogaf_version(void) { return "1.0.0"; }

int mogaf_run_stage(mogaf_ctx* ctx, const char* stage, const char* config_json,
                    char** out_summary_json) {
  return run(ctx, stage, config_json, out_summary_json);
}

#define MOGAF_STAGE_FN(name, stage)                                       \
  int name(mogaf_ctx* ctx, const char* config_json, char** out) {         \
    return run(ctx, stage, config_json, out);                             \
  }

MOGAF_STAGE_FN(mogaf_generate, "generate")
MOGAF_STAGE_FN(mogaf_group, "group")
MOGAF_STAGE_FN(mogaf_refine, "refine")
MOGAF_STAGE_FN(mogaf_train, "train")
MOGAF_STAGE_FN(mogaf_forecast, "forecast")
MOGAF_STAGE_FN(mogaf_eval, "eval")
MOGAF_STAGE_FN(mogaf_pipeline, "pipeline")
MOGAF_STAGE_FN(mogaf_export, "export")

#undef MOGAF_STAGE_FN

void mogaf_free_string(char* s) { std::free(s); }

}  // extern "C"
