#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "svyimp/frame.hpp"
#include "svyimp/kernels.hpp"

namespace svyimp {

enum class Race { white, black, hispanic, other };
enum class Region { midwest, northeast, south, west };

std::string_view to_string(Race race);
std::string_view to_string(Region region);
Race parse_race(std::string_view name);
Region parse_region(std::string_view name);

struct VisitCount {
  std::string tin;
  std::int64_t visits = 0;
};

struct Beneficiary {
  std::int64_t id = 0;
  double age = 0.0;
  int female = 0;
  double income = 0.0;
  Race race = Race::white;
  int rural = 0;
  int partial_dual = 0;
  int full_dual = 0;
  std::int64_t hcc_count = 0;
  std::int64_t admissions = 0;
  int depression = 0;
  int smi = 0;
  std::vector<VisitCount> visit_tins;
};

struct ClaimsConfig {
  double per_practice_mean = 40.0;
  double aux_outcome_corr = 0.6;
  /// Share of practices whose claims are billed under an unknown tin, so
  /// none of their beneficiaries can be attributed.
  double unlinked_practice_fraction = 0.1;

  void validate() const;
};

void to_json(nlohmann::json& j, const ClaimsConfig& c);
void from_json(const nlohmann::json& j, ClaimsConfig& c);

/// Region of a practice: per parent, or per practice for independents.
Region practice_region(const Frame& frame, std::int64_t practice_id);

/// Beneficiaries are driven by a practice trait correlated with the
/// standardized outcome 0, scaled so the practice mean of `age` correlates
/// with outcome 0 at about `aux_outcome_corr`.
std::vector<Beneficiary> generate_beneficiaries(const Frame& frame, const ClaimsConfig& config,
                                                std::uint64_t seed);

inline constexpr std::int64_t kUnattributed = -1;

/// Plurality attribution over frame tins; ties go to the smallest tin.
/// Returns a practice id per beneficiary, or kUnattributed.
std::vector<std::int64_t> attribute(const std::vector<Beneficiary>& beneficiaries,
                                    const Frame& frame);

struct ClaimsAggregate {
  std::int64_t practice_id = 0;
  std::int64_t practice_size = 0;
  Region region = Region::midwest;
  // Rate fields are NaN when practice_size == 0.
  double pct_rural = 0.0;
  double pct_female = 0.0;
  double pct_white = 0.0;
  double pct_black = 0.0;
  double pct_hispanic = 0.0;
  double pct_other = 0.0;
  double pct_partial_dual = 0.0;
  double pct_full_dual = 0.0;
  double pct_depression = 0.0;
  double pct_smi = 0.0;
  double mean_age = 0.0;
  double mean_income = 0.0;
  double mean_hcc = 0.0;
  double admissions_per_100 = 0.0;
  std::int64_t system_size = 0;
};

/// Names of the numeric aggregate fields in CSV order (after practice_id).
const std::vector<std::string>& claims_aggregate_fields();
/// Numeric value of a field by name; region is not numeric and is rejected.
double aggregate_field(const ClaimsAggregate& a, std::string_view name);

/// One aggregate per frame practice, in practice id order.
std::vector<ClaimsAggregate> aggregate(const std::vector<Beneficiary>& beneficiaries,
                                       const std::vector<std::int64_t>& attribution,
                                       const Frame& frame,
                                       Execution exec = Execution::parallel);

}  // namespace svyimp
