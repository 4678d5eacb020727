#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "svyimp/frame.hpp"

namespace svyimp {

enum class StageMethod { srswor, pps, external };

std::string_view to_string(StageMethod method);

struct StageProbabilitySpec {
  StageMethod method = StageMethod::srswor;
  /// Units drawn per stratum (first stage) or per selected cluster (later stages).
  std::int64_t sample_size = 1;
  /// Covariate giving PPS sizes; must be strictly positive on every unit.
  std::optional<std::string> size_measure;
  /// When a group has fewer units than sample_size, take all of them instead
  /// of raising DesignError.
  bool take_all_if_smaller = false;
  /// Unit id -> inclusion probability, for the external method.
  std::map<std::int64_t, double> external_probabilities;

  void validate(std::string_view where) const;
};

enum class DesignKind { three_level, two_level, single_level };

std::string_view to_string(DesignKind kind);
DesignKind parse_design_kind(std::string_view name);

struct DesignSpec {
  DesignKind design = DesignKind::three_level;
  std::vector<StageProbabilitySpec> stage_specs;
  /// First-stage stratification into terciles of this covariate.
  std::optional<std::string> strata_by;
  /// Single-stage selection of independent practices (own stratum); required
  /// for multi-level designs on frames that contain independent practices.
  std::optional<StageProbabilitySpec> independent_stage;

  void validate() const;
  Level first_stage_level() const;
  std::size_t stage_count() const;
};

void to_json(nlohmann::json& j, const StageProbabilitySpec& s);
void from_json(const nlohmann::json& j, StageProbabilitySpec& s);
void to_json(nlohmann::json& j, const DesignSpec& d);
void from_json(const nlohmann::json& j, DesignSpec& d);

/// Conditional inclusion probabilities of every frame unit at every stage.
struct StageProbabilities {
  DesignKind design = DesignKind::three_level;
  Level first_level = Level::parent;
  std::vector<double> first;       // by first-stage unit id
  std::vector<int> first_stratum;  // by first-stage unit id
  int n_strata = 1;
  std::vector<double> second;  // by second-stage unit id, given its cluster is selected
  std::vector<double> third;   // by practice id (three-level only); NaN for independents
  std::vector<double> independent;  // by practice id; NaN for system practices
  int independent_stratum = -1;
};

/// Inclusion probabilities for PPS without replacement of n units:
/// min(1, n s_i / sum s) with certainty units removed iteratively.
std::vector<double> pps_inclusion_probabilities(std::span<const double> sizes, std::int64_t n);

StageProbabilities compute_stage_probabilities(const Frame& frame, const DesignSpec& spec);

struct SelectedPractice {
  std::int64_t practice_id = 0;
  int stratum = 0;
  std::int64_t psu = 0;  // first-stage unit id (practice id for single-stage strata)
  double pi1 = 1.0;
  double pi2 = 1.0;
  double pi3 = 1.0;
  double pi_final = 1.0;
  double weight = 1.0;
};

/// A selected parent or subsidiary with its unconditional inclusion probability.
struct SelectedUnit {
  std::int64_t id = 0;
  int stratum = 0;
  std::int64_t psu = 0;
  double pi = 1.0;
};

struct SampleDraw {
  DesignKind design = DesignKind::three_level;
  std::vector<SelectedPractice> units;  // sorted by practice_id
  std::vector<SelectedUnit> parents;       // sorted by id
  std::vector<SelectedUnit> subsidiaries;  // sorted by id

  const SelectedPractice* find(std::int64_t practice_id) const;
};

SampleDraw draw_sample(const Frame& frame, const DesignSpec& spec, std::uint64_t seed);

}  // namespace svyimp
