#include "svyimp/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "svyimp/error.hpp"

namespace svyimp {

std::string_view to_string(ColumnRole role) {
  switch (role) {
    case ColumnRole::outcome: return "outcome";
    case ColumnRole::frame_covariate: return "frame_covariate";
    case ColumnRole::claims_covariate: return "claims_covariate";
  }
  return "outcome";
}

ColumnRole parse_column_role(std::string_view name) {
  for (auto r : {ColumnRole::outcome, ColumnRole::frame_covariate, ColumnRole::claims_covariate})
    if (to_string(r) == name) return r;
  throw FormatError("unknown column role '" + std::string(name) + "'");
}

bool StudyDataset::has_column(std::string_view name) const {
  return std::find(columns.begin(), columns.end(), name) != columns.end();
}

std::size_t StudyDataset::column_index(std::string_view name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw ConfigError("dataset has no column '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - columns.begin());
}

std::vector<std::string> StudyDataset::columns_with_role(ColumnRole role) const {
  std::vector<std::string> out;
  for (std::size_t c = 0; c < columns.size(); ++c)
    if (roles[c] == role) out.push_back(columns[c]);
  return out;
}

std::size_t StudyDataset::observed_count(std::size_t col) const {
  return static_cast<std::size_t>(observed.col(static_cast<Eigen::Index>(col)).count());
}

std::size_t StudyDataset::missing_count(std::size_t col) const {
  return rows() - observed_count(col);
}

void StudyDataset::validate() const {
  const auto n = values.rows();
  if (roles.size() != columns.size() || values.cols() != static_cast<Eigen::Index>(columns.size()))
    throw FormatError("dataset: column metadata does not match the value matrix");
  if (observed.rows() != n || observed.cols() != values.cols())
    throw FormatError("dataset: mask shape does not match the value matrix");
  const auto rows_n = static_cast<std::size_t>(n);
  if (practice_id.size() != rows_n || subsidiary_id.size() != rows_n ||
      parent_id.size() != rows_n || cluster_id.size() != rows_n || selected.size() != rows_n ||
      responded.size() != rows_n)
    throw FormatError("dataset: row metadata length does not match the value matrix");
  for (Eigen::Index c = 0; c < values.cols(); ++c)
    for (Eigen::Index r = 0; r < n; ++r)
      if (observed(r, c) == std::isnan(values(r, c)))
        throw FormatError(fmt::format("dataset: cell ({}, {}) mask disagrees with its value", r,
                                      columns[c]));
}

std::string outcome_column_name(std::size_t outcome_index) {
  return fmt::format("y{}", outcome_index);
}

const std::vector<std::string>& claims_model_columns() {
  static const std::vector<std::string> cols = {
      "practice_size",    "region_northeast", "region_south",   "region_west",
      "pct_rural",        "mean_age",         "pct_female",     "mean_income",
      "system_size",      "pct_white",        "pct_black",      "pct_hispanic",
      "pct_partial_dual", "pct_full_dual",    "pct_depression", "pct_smi",
      "mean_hcc",         "admissions_per_100"};
  return cols;
}

const std::vector<std::string>& claims_dataset_columns() {
  static const std::vector<std::string> cols = [] {
    auto c = claims_model_columns();
    c.insert(c.begin() + 12, "pct_other");
    return c;
  }();
  return cols;
}

bool claims_column_always_observed(std::string_view name) {
  return name == "system_size" || name.substr(0, 7) == "region_";
}

StudyDataset build_dataset(const Frame& frame, const SampleDraw& draw,
                           const std::vector<ClaimsAggregate>& aggregates,
                           const std::vector<std::uint8_t>& responded_practice) {
  const auto n = frame.practices.size();
  if (responded_practice.size() != n)
    throw FormatError("build_dataset: response vector length does not match the frame");
  if (!aggregates.empty() && aggregates.size() != n)
    throw FormatError("build_dataset: one claims aggregate per practice is required");

  StudyDataset d;
  const auto k_out = frame.outcome_count();
  for (std::size_t m = 0; m < k_out; ++m) {
    d.columns.push_back(outcome_column_name(m));
    d.roles.push_back(ColumnRole::outcome);
  }
  for (auto name : kFrameCovariates) {
    d.columns.emplace_back(name);
    d.roles.push_back(ColumnRole::frame_covariate);
  }
  if (!aggregates.empty()) {
    for (const auto& name : claims_dataset_columns()) {
      d.columns.push_back(name);
      d.roles.push_back(ColumnRole::claims_covariate);
    }
  }
  const auto n_rows = static_cast<Eigen::Index>(n);
  const auto n_cols = static_cast<Eigen::Index>(d.columns.size());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  d.values = Eigen::MatrixXd::Constant(n_rows, n_cols, nan);
  d.observed = BoolMatrix::Constant(n_rows, n_cols, false);
  d.selected.assign(n, 0);
  d.responded = responded_practice;
  for (const auto& u : draw.units) d.selected[u.practice_id] = 1;

  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = frame.practices[i];
    const auto r = static_cast<Eigen::Index>(i);
    d.practice_id.push_back(p.id);
    if (p.os_id) {
      d.subsidiary_id.push_back(*p.os_id);
      d.parent_id.push_back(frame.subsidiaries[*p.os_id].parent_id);
      d.cluster_id.push_back(fmt::format("S{}", *p.os_id));
    } else {
      d.subsidiary_id.push_back(-1);
      d.parent_id.push_back(-1);
      d.cluster_id.push_back(fmt::format("P{}", p.id));
    }
    if (responded_practice[i] && !d.selected[i])
      throw FormatError(fmt::format("build_dataset: practice {} responded but was not selected", i));
    Eigen::Index c = 0;
    for (std::size_t m = 0; m < k_out; ++m, ++c) {
      if (responded_practice[i]) d.values(r, c) = p.true_outcomes[m];
    }
    for (auto name : kFrameCovariates) d.values(r, c++) = frame_covariate(frame, p.id, name);
    if (!aggregates.empty()) {
      const auto& a = aggregates[i];
      const bool linked = a.practice_size > 0;
      for (const auto& name : claims_dataset_columns()) {
        double v = nan;
        if (name.substr(0, 7) == "region_") {
          v = to_string(a.region) == name.substr(7) ? 1.0 : 0.0;
        } else if (linked || claims_column_always_observed(name)) {
          v = aggregate_field(a, name);
        }
        d.values(r, c++) = v;
      }
    }
  }
  for (Eigen::Index c = 0; c < n_cols; ++c)
    for (Eigen::Index r = 0; r < n_rows; ++r) d.observed(r, c) = !std::isnan(d.values(r, c));
  return d;
}

}  // namespace svyimp
