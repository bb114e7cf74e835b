#pragma once

#include <string>

#include <json.hpp>

#include "weyllab/config.hpp"

namespace weyllab {

/// 16 hex digits of FNV-1a over the normalized config echo.
std::string config_hash(const RunPlan& plan);

/// Creates <root>/<hash>-s<seed>, or the first free "-1", "-2", ... variant.
/// Existing directories are never reused.
std::string create_run_directory(const std::string& root, const std::string& hash,
                                 std::uint64_t seed);

nlohmann::json platform_flags();

struct RunResult {
  std::string run_dir;
  nlohmann::json manifest;
  nlohmann::json report;
};

/// Runs the plan. The manifest is written first (status "incomplete"),
/// per-draw records are appended to draws.jsonl and eigenvalues.csv as they
/// finish, and report.json plus the final manifest come last. On failure the
/// partial files stay and the manifest records the error.
RunResult orchestrate(const RunPlan& plan, const std::string& root_override = "");

/// Manifest status and the headline numbers of a finished run directory.
nlohmann::json summarize_run(const std::string& run_dir);

}  // namespace weyllab
