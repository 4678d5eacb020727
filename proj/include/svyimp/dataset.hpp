#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "svyimp/claims.hpp"
#include "svyimp/frame.hpp"
#include "svyimp/sampling.hpp"

namespace svyimp {

enum class ColumnRole { outcome, frame_covariate, claims_covariate };

std::string_view to_string(ColumnRole role);
ColumnRole parse_column_role(std::string_view name);

using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Responses of the selected parents or subsidiaries. The unit value of an
/// outcome is the mean over the unit's practices, observed iff responded.
struct LevelResponses {
  std::vector<std::int64_t> unit_id;
  std::vector<std::uint8_t> responded;
  Eigen::MatrixXd outcomes;  // units x outcome columns, NaN when not responded
};

/// Full-frame layout: one row per frame practice, in practice id order.
struct StudyDataset {
  std::vector<std::string> columns;
  std::vector<ColumnRole> roles;
  Eigen::MatrixXd values;  // NaN where not observed
  BoolMatrix observed;
  std::vector<std::int64_t> practice_id;
  std::vector<std::int64_t> subsidiary_id;  // -1 for independent practices
  std::vector<std::int64_t> parent_id;      // -1 for independent practices
  std::vector<std::string> cluster_id;      // "S<subsidiary>" or "P<practice>"
  std::vector<std::uint8_t> selected;
  std::vector<std::uint8_t> responded;
  LevelResponses subsidiaries;
  LevelResponses parents;

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t cols() const { return columns.size(); }
  bool has_column(std::string_view name) const;
  std::size_t column_index(std::string_view name) const;
  std::vector<std::string> columns_with_role(ColumnRole role) const;
  std::vector<std::string> outcome_columns() const { return columns_with_role(ColumnRole::outcome); }
  std::size_t missing_count(std::size_t col) const;
  std::size_t observed_count(std::size_t col) const;
  /// Shape and mask consistency: NaN exactly where unobserved.
  void validate() const;
};

std::string outcome_column_name(std::size_t outcome_index);

/// Claims columns as modeled: region as three dummies (midwest is the
/// reference) and race without pct_other (the reference category).
const std::vector<std::string>& claims_model_columns();
/// Every claims column stored in a dataset.
const std::vector<std::string>& claims_dataset_columns();
/// Claims columns that come from the frame rather than from beneficiaries,
/// so they are observed even when no beneficiary is attributed.
bool claims_column_always_observed(std::string_view name);

/// Builds the full-frame dataset with outcome cells observed where
/// `responded_practice` is set. Claims columns are added only when
/// `aggregates` is non-empty.
StudyDataset build_dataset(const Frame& frame, const SampleDraw& draw,
                           const std::vector<ClaimsAggregate>& aggregates,
                           const std::vector<std::uint8_t>& responded_practice);

}  // namespace svyimp
