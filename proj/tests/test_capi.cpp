#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "../vendor/json.hpp"
#include "doctest.h"
#include "mogaf/mogaf.h"
#include "pipeline/pipeline.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(bool create = true) {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("mogaf_capi_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    if (create) fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

struct Ctx {
  mogaf_ctx* ptr;
  Ctx() : ptr(mogaf_ctx_new()) {}
  ~Ctx() { mogaf_ctx_free(ptr); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json pipeline_cfg(const fs::path& dir) {
  return {{"groups", {"rigid"}},
          {"gaussians_per_group", 10},
          {"timesteps", 12},
          {"seed", 5},
          {"horizon", 4},
          {"refine_steps", 5},
          {"forecaster",
           {{"epochs", 3},
            {"d_model", 8},
            {"heads", 2},
            {"ff_dim", 16},
            {"window", 5}}},
          {"output_dir", dir.string()}};
}

}  // namespace

TEST_CASE("version string") {
  CHECK(std::strcmp(mogaf_version(), "1.0.0") == 0);
}

TEST_CASE("context lifecycle and argument validation") {
  Ctx ctx;
  REQUIRE(ctx.ptr != nullptr);
  CHECK(std::string(mogaf_last_error(ctx.ptr)).empty());
  CHECK(mogaf_run_stage(ctx.ptr, nullptr, "{}", nullptr) == MOGAF_ERR_CONFIG);
  CHECK_FALSE(std::string(mogaf_last_error(ctx.ptr)).empty());
  CHECK(mogaf_run_stage(nullptr, "generate", "{}", nullptr) ==
        MOGAF_ERR_CONFIG);
  CHECK(std::string(mogaf_last_error(nullptr)) == "null context");
}

TEST_CASE("status codes map error categories") {
  Ctx ctx;
  TempDir tmp;
  char* out = nullptr;

  SUBCASE("config errors return 2") {
    // Unknown stage.
    CHECK(mogaf_run_stage(ctx.ptr, "mystery", "{}", &out) == MOGAF_ERR_CONFIG);
    CHECK(out == nullptr);
    // Malformed JSON.
    CHECK(mogaf_generate(ctx.ptr, "{nope", &out) == MOGAF_ERR_CONFIG);
    // Invalid synthesis parameters.
    const json bad = {{"groups", {"rigid"}},
                      {"timesteps", 2},
                      {"output_dir", tmp.path.string()}};
    CHECK(mogaf_generate(ctx.ptr, bad.dump().c_str(), &out) ==
          MOGAF_ERR_CONFIG);
    CHECK_FALSE(std::string(mogaf_last_error(ctx.ptr)).empty());
  }
  SUBCASE("missing input files return 4") {
    const json cfg = {{"scene", (tmp.path / "absent.json").string()},
                      {"output_dir", tmp.path.string()}};
    CHECK(mogaf_export(ctx.ptr, cfg.dump().c_str(), &out) == MOGAF_ERR_IO);
    CHECK(std::string(mogaf_last_error(ctx.ptr)).find("absent.json") !=
          std::string::npos);
  }
  SUBCASE("success clears the previous error") {
    CHECK(mogaf_run_stage(ctx.ptr, "mystery", "{}", nullptr) ==
          MOGAF_ERR_CONFIG);
    json cfg = pipeline_cfg(tmp.path);
    cfg["dry_run"] = true;
    CHECK(mogaf_pipeline(ctx.ptr, cfg.dump().c_str(), &out) == MOGAF_OK);
    CHECK(std::string(mogaf_last_error(ctx.ptr)).empty());
    REQUIRE(out != nullptr);
    const json summary = json::parse(out);
    CHECK(summary.at("dry_run") == true);
    mogaf_free_string(out);
  }
}

TEST_CASE("numeric failures return 3") {
  Ctx ctx;
  TempDir tmp;
  // A memory bank with overlapping groups trips the internal consistency
  // check, which is classified as a numerical error.
  const json bank = {
      {"format_version", 1},
      {"groups",
       {{{"members", {0, 1}}, {"tau", 0}}, {{"members", {1, 2}}, {"tau", 0}}}}};
  {
    std::ofstream out(tmp.path / "bank.json");
    out << bank.dump();
  }
  // A tiny valid scene for the refine stage to load first.
  json gen = {{"groups", {"rigid"}},
              {"gaussians_per_group", 3},
              {"timesteps", 4},
              {"output_dir", tmp.path.string()}};
  char* out = nullptr;
  REQUIRE(mogaf_generate(ctx.ptr, gen.dump().c_str(), &out) == MOGAF_OK);
  mogaf_free_string(out);
  const json cfg = {{"scene", (tmp.path / "scene.json").string()},
                    {"bank", (tmp.path / "bank.json").string()},
                    {"output_dir", (tmp.path / "refined").string()}};
  CHECK(mogaf_refine(ctx.ptr, cfg.dump().c_str(), nullptr) ==
        MOGAF_ERR_NUMERIC);
  CHECK_FALSE(std::string(mogaf_last_error(ctx.ptr)).empty());
}

TEST_CASE("pipeline through the C API matches the in-process pipeline") {
  Ctx ctx;
  TempDir a, b;
  char* out = nullptr;
  REQUIRE(mogaf_pipeline(ctx.ptr, pipeline_cfg(a.path).dump().c_str(), &out) ==
          MOGAF_OK);
  REQUIRE(out != nullptr);
  const json capi_summary = json::parse(out);
  mogaf_free_string(out);

  const json inproc_summary = mogaf::pipeline::run_pipeline(pipeline_cfg(b.path));

  // Identical reports byte for byte across the library boundary.
  CHECK(slurp(a.path / "report.json") == slurp(b.path / "report.json"));
  CHECK(slurp(a.path / "forecast.csv") == slurp(b.path / "forecast.csv"));
  CHECK(capi_summary.at("report") == inproc_summary.at("report"));
  CHECK(capi_summary.at("label_accuracy") ==
        inproc_summary.at("label_accuracy"));
}
