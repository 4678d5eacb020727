#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "svyimp/claims.hpp"
#include "svyimp/config.hpp"
#include "svyimp/estimators.hpp"
#include "svyimp/frame.hpp"
#include "svyimp/gibbs.hpp"
#include "svyimp/sampling.hpp"

namespace svyimp {

namespace fs = std::filesystem;

/// One requested (method, scenario, outcome) cell of the comparison grid.
struct CellResult {
  Method method = Method::naive;
  std::optional<Scenario> scenario;  // set for mi only
  std::string outcome;
  std::optional<EstimateReport> report;
  std::string error;  // set when report is empty

  bool ok() const { return report.has_value(); }
  std::string label() const;  // "naive", "weighted", "MI1", "MI2"
};

struct ComparisonTable {
  std::vector<std::string> outcomes;
  std::vector<std::string> labels;  // requested column labels in display order
  std::vector<CellResult> cells;
  nlohmann::json metadata;

  const CellResult* find(const std::string& label, const std::string& outcome) const;
  std::size_t failed() const;
  /// 0 all cells ok, 2 some failed, 3 all failed.
  int exit_code() const;
};

void to_json(nlohmann::json& j, const CellResult& c);

/// Columns outcome, then <label>_mean / <label>_se per label, then errors.
void write_comparison_csv(const fs::path& path, const ComparisonTable& table);

struct EfficiencyRecord {
  Scenario scenario = Scenario::MI1;
  std::string outcome;
  EfficiencyDiagnostic diagnostic;
};

/// Frame and claims. Built once per config from the base seed and shared by
/// every replicate so the target population stays fixed.
struct Population {
  Frame frame;
  std::vector<Beneficiary> beneficiaries;
  std::vector<std::int64_t> attribution;
  std::vector<ClaimsAggregate> aggregates;  // empty when MI2 is not requested
};

Population build_population(const ExperimentConfig& config);

/// Finite-population truth per outcome column at the configured level.
std::map<std::string, double> population_truth(const ExperimentConfig& config,
                                               const Frame& frame);

struct ReplicateResult {
  std::uint64_t seed = 0;
  ComparisonTable table;
  std::vector<EfficiencyRecord> efficiency;
};

enum class Persist { summary, everything };

struct ScenarioImputation {
  Scenario scenario = Scenario::MI1;
  std::optional<ImputationSet> set;
  std::string error;  // set when imputation failed
};

/// Imputes every requested scenario; stream per scenario is
/// derive_seed(seed, "impute", scenario).
std::vector<ScenarioImputation> impute_scenarios(const ExperimentConfig& config,
                                                 const StudyDataset& data, std::uint64_t seed);

/// Fills every requested cell from a dataset, its draw and the imputations.
/// With `detail_out` the efficiency and correlation tables are written there.
ReplicateResult estimate_all(const ExperimentConfig& config, const StudyDataset& data,
                             const SampleDraw& draw,
                             const std::vector<ScenarioImputation>& imputations,
                             std::uint64_t seed, const std::optional<fs::path>& detail_out);

/// comparison.csv, efficiency.csv, estimates.json and manifest.json.
void write_estimates(const fs::path& out, const ExperimentConfig& config,
                     const ReplicateResult& result, std::vector<std::string> files);

/// Sample, missingness, imputation and estimation for one seed. With
/// Persist::everything every intermediate artifact lands under `out`.
ReplicateResult run_replicate(const ExperimentConfig& config, const Population& population,
                              std::uint64_t seed, const std::optional<fs::path>& out,
                              Persist persist = Persist::summary);

/// Full pipeline with every artifact persisted. Returns the table; the
/// process exit status is table.exit_code().
ComparisonTable run_pipeline(const ExperimentConfig& config, std::uint64_t seed,
                             const fs::path& out);

struct ReplicateRecord {
  std::int64_t index = 0;
  std::uint64_t seed = 0;
  std::optional<ReplicateResult> result;
  std::string error;  // whole-replicate failure
};

struct SummaryRow {
  Method method = Method::naive;
  std::optional<Scenario> scenario;
  std::string outcome;
  double truth = 0.0;
  std::int64_t n_ok = 0;
  std::int64_t n_failed = 0;
  double mean_estimate = 0.0;
  double bias = 0.0;
  double empirical_se = 0.0;
  double mean_se = 0.0;
  double median_se = 0.0;
  double coverage = 0.0;  // share with |estimate - truth| <= 2 se

  std::string label() const;
};

/// One row per (method, scenario, outcome) seen in the records. Statistics
/// over cells that succeeded; NaN where fewer than two did.
std::vector<SummaryRow> summarize_replicates(const std::vector<ReplicateRecord>& records,
                                             const std::map<std::string, double>& truth);

void write_summary_csv(const fs::path& path, const std::vector<SummaryRow>& rows);

struct StudyResult {
  std::vector<ReplicateRecord> records;
  std::vector<SummaryRow> summary;
  std::map<std::string, double> truth;

  int exit_code() const;
};

/// Replicate r uses replicate_seed(base_seed, r). Replicates run concurrently
/// up to config.workers; a failing replicate is recorded and the rest go on.
/// When `out` is set each replicate writes to replicates/rNNNN/ and the
/// summary to summary.csv.
StudyResult replicate_study(const ExperimentConfig& config, const std::optional<fs::path>& out);

std::uint64_t replicate_seed(std::uint64_t base_seed, std::int64_t replicate);

}  // namespace svyimp
