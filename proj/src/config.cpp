#include "svyimp/config.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "svyimp/error.hpp"
#include "svyimp/json_util.hpp"

namespace svyimp {

void ExperimentConfig::validate() const {
  generator.validate();
  design.validate();
  response.validate();
  claims.validate();
  imputation.validate();
  if (replicates < 1) throw ConfigError("replicates: must be >= 1");
  if (workers < 1) throw ConfigError("workers: must be >= 1");
  if (methods.empty()) throw ConfigError("methods: at least one method is required");
  if (wants(Method::mi) && scenarios.empty())
    throw ConfigError("scenarios: required when method mi is requested");
  (void)outcome_columns();
}

bool ExperimentConfig::wants(Method m) const {
  return std::find(methods.begin(), methods.end(), m) != methods.end();
}

bool ExperimentConfig::wants(Scenario s) const {
  return wants(Method::mi) && std::find(scenarios.begin(), scenarios.end(), s) != scenarios.end();
}

std::vector<std::string> ExperimentConfig::outcome_columns() const {
  std::vector<std::string> all;
  for (std::int64_t m = 0; m < generator.outcome_count; ++m)
    all.push_back(outcome_column_name(static_cast<std::size_t>(m)));
  if (outcomes.empty()) return all;
  for (const auto& o : outcomes)
    if (std::find(all.begin(), all.end(), o) == all.end())
      throw ConfigError(fmt::format("outcomes: unknown outcome '{}' (outcome_count = {})", o,
                                    generator.outcome_count));
  return outcomes;
}

ExperimentConfig parse_config(const nlohmann::json& j) {
  json_util::require_keys(j, "config",
                          {"generator", "design", "response", "claims", "imputation", "outcomes",
                           "scenarios", "methods", "level", "replicates", "base_seed",
                           "output_dir", "workers", "estimators"});
  ExperimentConfig c;
  if (j.contains("generator")) c.generator = j.at("generator").get<GeneratorConfig>();
  if (!j.contains("design")) throw ConfigError("design: section is required");
  c.design = j.at("design").get<DesignSpec>();
  if (!j.contains("response")) throw ConfigError("response: section is required");
  c.response = j.at("response").get<ResponseModel>();
  if (j.contains("claims")) c.claims = j.at("claims").get<ClaimsConfig>();
  if (j.contains("imputation")) c.imputation = j.at("imputation").get<ImputationModelSpec>();
  json_util::get_to(j, "config", "outcomes", c.outcomes);
  if (j.contains("scenarios")) {
    std::vector<std::string> names;
    json_util::get_to(j, "config", "scenarios", names);
    c.scenarios.clear();
    for (const auto& n : names) c.scenarios.push_back(parse_scenario(n));
  }
  if (j.contains("methods")) {
    std::vector<std::string> names;
    json_util::get_to(j, "config", "methods", names);
    c.methods.clear();
    for (const auto& n : names) c.methods.push_back(parse_method(n));
  }
  if (j.contains("level")) {
    std::string level;
    json_util::get_to(j, "config", "level", level);
    c.level = parse_level(level);
  }
  json_util::get_to(j, "config", "replicates", c.replicates);
  json_util::get_to(j, "config", "base_seed", c.base_seed);
  json_util::get_to(j, "config", "output_dir", c.output_dir);
  json_util::get_to(j, "config", "workers", c.workers);
  if (j.contains("estimators")) {
    const auto& e = j.at("estimators");
    json_util::require_keys(e, "estimators", {"finite_population_correction"});
    json_util::get_to(e, "estimators", "finite_population_correction",
                      c.estimators.finite_population_correction);
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
  return parse_config(j);
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["generator"] = c.generator;
  j["design"] = c.design;
  j["response"] = c.response;
  j["claims"] = c.claims;
  j["imputation"] = c.imputation;
  j["outcomes"] = c.outcomes;
  std::vector<std::string> scenarios, methods;
  for (auto s : c.scenarios) scenarios.emplace_back(to_string(s));
  for (auto m : c.methods) methods.emplace_back(to_string(m));
  j["scenarios"] = scenarios;
  j["methods"] = methods;
  j["level"] = std::string(to_string(c.level));
  j["replicates"] = c.replicates;
  j["base_seed"] = c.base_seed;
  j["output_dir"] = c.output_dir;
  j["workers"] = c.workers;
  j["estimators"] = {{"finite_population_correction", c.estimators.finite_population_correction}};
  return j;
}

std::string config_digest(const ExperimentConfig& c) {
  const auto text = config_to_json(c).dump();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw ConfigError("config digest: SHA-256 failed");
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

}  // namespace svyimp
