#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "svyimp/claims.hpp"
#include "svyimp/estimators.hpp"
#include "svyimp/frame.hpp"
#include "svyimp/gibbs.hpp"
#include "svyimp/missingness.hpp"
#include "svyimp/sampling.hpp"

namespace svyimp {

struct EstimatorOptions {
  bool finite_population_correction = false;
};

/// One JSON document with a section per module. Unknown keys are rejected.
struct ExperimentConfig {
  GeneratorConfig generator;
  DesignSpec design;
  ResponseModel response;
  ClaimsConfig claims;
  ImputationModelSpec imputation;
  std::vector<std::string> outcomes;  // empty: every outcome column
  std::vector<Scenario> scenarios = {Scenario::MI1, Scenario::MI2};
  std::vector<Method> methods = {Method::naive, Method::weighted, Method::mi};
  Level level = Level::practice;
  std::int64_t replicates = 1;
  std::uint64_t base_seed = 1;
  std::string output_dir = "out";
  int workers = 1;
  EstimatorOptions estimators;

  void validate() const;
  bool wants(Method m) const;
  bool wants(Scenario s) const;
  /// Outcome column names, resolved against the generator's outcome count.
  std::vector<std::string> outcome_columns() const;
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const ExperimentConfig& c);
/// SHA-256 (hex) of the canonical JSON form.
std::string config_digest(const ExperimentConfig& c);

}  // namespace svyimp
