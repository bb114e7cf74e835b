#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "weyllab/errors.hpp"
#include "weyllab/experiments.hpp"
#include "weyllab/perturbation.hpp"

namespace weyllab {

/// Every problem found in a config, one message per violated constraint.
class ConfigError : public Refusal {
 public:
  explicit ConfigError(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  std::vector<std::string> errors_;
};

struct RunPlan {
  std::string experiment;  // weyl, counterexample, stochastics, renorm
  std::uint64_t seed = 1;
  int threads = 1;
  std::string output_root = "runs";
  bool pseudospectrum = false;
  int pseudospectrum_re = 64;
  int pseudospectrum_im = 48;

  WeylConfig weyl;
  CounterexampleConfig counterexample;
  StochasticsConfig stochastics;
  RenormExperimentConfig renorm;

  /// Normalized document: every field with its effective value, plus derived
  /// [schedule.paper] / [schedule.lab] tables.
  nlohmann::json normalized;
  std::string echo() const;
};

/// Checks the raw document and returns the plan, or throws ConfigError with
/// the complete list of problems.
RunPlan validate_config(const nlohmann::json& raw);
RunPlan load_config(const std::string& path);
RunPlan load_config_text(const std::string& text);

}  // namespace weyllab
