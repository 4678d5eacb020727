#pragma once

#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "svyimp/claims.hpp"
#include "svyimp/dataset.hpp"
#include "svyimp/estimators.hpp"
#include "svyimp/frame.hpp"
#include "svyimp/gibbs.hpp"
#include "svyimp/sampling.hpp"

// Artifact files. Every writer is deterministic: numbers use the shortest
// round-trip form and rows follow id order.

namespace svyimp::io {

namespace fs = std::filesystem;

void write_json(const fs::path& path, const nlohmann::json& j);
nlohmann::json read_json(const fs::path& path);

/// parents.csv, subsidiaries.csv, practices.csv and frame.json.
void write_frame(const fs::path& dir, const Frame& frame);
Frame read_frame(const fs::path& dir);

/// sample.csv (practice_id, pi1, pi2, pi3, pi_final, weight), design_units.csv
/// and sample.json.
void write_sample(const fs::path& dir, const SampleDraw& draw);
SampleDraw read_sample(const fs::path& dir);

void write_beneficiaries(const fs::path& path, const std::vector<Beneficiary>& beneficiaries);
std::vector<Beneficiary> read_beneficiaries(const fs::path& path);
void write_attribution(const fs::path& path, const std::vector<std::int64_t>& attribution);
void write_aggregates(const fs::path& path, const std::vector<ClaimsAggregate>& aggregates);
std::vector<ClaimsAggregate> read_aggregates(const fs::path& path);

/// dataset.csv, mask.csv (obs/mis), level_responses.csv and dataset.json.
void write_dataset(const fs::path& dir, const StudyDataset& data);
StudyDataset read_dataset(const fs::path& dir);

/// imputation_01.csv ... imputation_DD.csv and diagnostics.json.
void write_imputations(const fs::path& dir, const ImputationSet& set);
/// Reads completed datasets back on top of `original`.
ImputationSet read_imputations(const fs::path& dir, const StudyDataset& original);

/// Rows Mean / S.E. / Ratio over columns Y1..YD.
void write_efficiency(const fs::path& path, const ImputationSet& set,
                      const EfficiencyDiagnostic& diag, const std::string& outcome);
/// Columns covariate, Y, Minimum, Mean, Maximum, St. Dev.
void write_correlations(const fs::path& path, const std::vector<CorrelationRow>& rows);

}  // namespace svyimp::io
