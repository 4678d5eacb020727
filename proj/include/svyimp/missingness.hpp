#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "svyimp/claims.hpp"
#include "svyimp/dataset.hpp"
#include "svyimp/frame.hpp"
#include "svyimp/sampling.hpp"

namespace svyimp {

/// Logistic unit non-response on frame covariates. The slope map is shared
/// by every level; covariates resolve per level as in unit_covariate().
struct ResponseModel {
  std::map<Level, double> level_targets;
  std::map<std::string, double> coefficients;
  std::map<Level, double> intercepts;  // set by calibration; +inf when the target is 1

  void validate() const;
  bool calibrated() const;
};

void to_json(nlohmann::json& j, const ResponseModel& m);
void from_json(const nlohmann::json& j, ResponseModel& m);

/// Response probability of one unit under a calibrated model.
double response_probability(const Frame& frame, const ResponseModel& model, Level level,
                            std::int64_t unit_id);

/// Mean response probability over the selected units of a level.
double expected_response_rate(const Frame& frame, const SampleDraw& draw,
                              const ResponseModel& model, Level level);

/// Selected unit ids of a level in ascending order.
std::vector<std::int64_t> selected_units(const SampleDraw& draw, Level level);

/// Solves each level's intercept so the expected response rate among the
/// selected units equals its target within 1e-6.
ResponseModel calibrate_response_model(const Frame& frame, const SampleDraw& draw,
                                       const ResponseModel& model);

StudyDataset apply_missingness(const Frame& frame, const SampleDraw& draw,
                               const std::vector<ClaimsAggregate>& aggregates,
                               const ResponseModel& calibrated, std::uint64_t seed);

}  // namespace svyimp
