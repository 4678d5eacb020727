#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace svyimp {

enum class Level { practice, subsidiary, parent };

std::string_view to_string(Level level);
Level parse_level(std::string_view name);

/// Top of the ownership hierarchy. Ids are dense: parents[i].id == i.
struct CorporateParent {
  std::int64_t id = 0;
  std::int64_t nach = 0;
  std::int64_t nmg = 0;
  std::int64_t nos = 0;
  double pertot = 0.0;
};

struct OwnerSubsidiary {
  std::int64_t id = 0;
  std::int64_t parent_id = 0;
  double latent_trait = 0.0;
};

struct Practice {
  std::int64_t id = 0;
  std::optional<std::int64_t> os_id;  // empty for independent practices
  std::int64_t np = 0;
  std::int64_t npcp = 0;
  std::string tin;
  std::vector<double> true_outcomes;

  bool independent() const { return !os_id.has_value(); }
};

struct GeneratorConfig {
  std::int64_t n_parents = 570;
  double mean_subsidiaries_per_parent = 1.6;
  double mean_practices_per_subsidiary = 6.0;
  std::int64_t n_independent_practices = 2000;
  std::int64_t outcome_count = 2;
  double cluster_icc = 0.3;
  double covariate_outcome_corr = 0.15;
  /// Outcome indices generated as 0/1 by thresholding the latent Gaussian.
  std::vector<std::int64_t> binary_outcomes;
  double binary_threshold = 1.0;
  double outcome_mean = 0.5;
  double outcome_sd = 0.15;

  /// Throws ConfigError naming the first offending field.
  void validate() const;
};

void to_json(nlohmann::json& j, const GeneratorConfig& c);
void from_json(const nlohmann::json& j, GeneratorConfig& c);

/// The six covariates known for every practice in the frame.
inline constexpr std::array<std::string_view, 6> kFrameCovariates = {"np",  "npcp", "nach",
                                                                     "nmg", "nos",  "pertot"};

struct Frame {
  std::vector<CorporateParent> parents;
  std::vector<OwnerSubsidiary> subsidiaries;
  std::vector<Practice> practices;
  GeneratorConfig generation_config;
  std::uint64_t seed = 0;

  /// Practice ids per subsidiary and per parent (built by index()).
  std::vector<std::vector<std::int64_t>> practices_by_subsidiary;
  std::vector<std::vector<std::int64_t>> subsidiaries_by_parent;
  std::vector<std::vector<std::int64_t>> practices_by_parent;

  /// Rebuilds the lookup tables from the three record lists.
  void index();
  /// Referential integrity and covariate completeness; throws FormatError.
  void validate() const;

  std::optional<std::int64_t> parent_of_practice(std::int64_t practice_id) const;
  std::size_t outcome_count() const;
  std::vector<std::int64_t> independent_practices() const;
};

Frame generate_frame(const GeneratorConfig& config, std::uint64_t seed);

/// Finite-population mean of outcome `outcome_index`. At subsidiary and parent
/// level each unit contributes the mean over its practices; units without
/// practices are skipped.
double population_mean(const Frame& frame, std::size_t outcome_index, Level level);

/// Value of one of the six frame covariates for a practice. Independent
/// practices have no system: nach = nmg = nos = 0 and pertot = 1.
double frame_covariate(const Frame& frame, std::int64_t practice_id, std::string_view name);

/// Covariate of a unit at any level, used for stratification, PPS size and
/// response slopes. Parent/subsidiary units expose system covariates plus
/// sums of np/npcp and n_practices over their practices.
double unit_covariate(const Frame& frame, Level level, std::int64_t unit_id,
                      std::string_view name);

}  // namespace svyimp
