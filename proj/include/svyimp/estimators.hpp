#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "svyimp/dataset.hpp"
#include "svyimp/gibbs.hpp"
#include "svyimp/sampling.hpp"

namespace svyimp {

enum class Method { naive, weighted, mi };

std::string_view to_string(Method m);
Method parse_method(std::string_view name);

struct RubinComponents {
  double var_within = 0.0;
  double var_between = 0.0;
  std::int64_t D = 0;
};

struct EstimateReport {
  Method method = Method::naive;
  std::optional<Scenario> scenario;
  std::string outcome;
  Level level = Level::practice;
  double mean = 0.0;
  double se = 0.0;
  std::int64_t n_used = 0;
  std::optional<RubinComponents> components;
};

void to_json(nlohmann::json& j, const EstimateReport& r);

/// Case-deletion mean with se = s / sqrt(n). At subsidiary/parent level the
/// responding units' values are used.
EstimateReport naive_mean(const StudyDataset& data, const std::string& outcome,
                          Level level = Level::practice);

struct WeightedObservation {
  double y = 0.0;
  double w = 1.0;
  int stratum = 0;
  std::int64_t psu = 0;
};

/// Ratio estimator sum(w y) / sum(w) and its stratified with-replacement
/// linearization variance over first-stage units.
std::pair<double, double> ratio_mean_and_variance(std::span<const WeightedObservation> obs);

EstimateReport weighted_mean(const StudyDataset& data, const SampleDraw& draw,
                             const std::string& outcome, Level level = Level::practice);

/// Rubin's rules over (mean_d, var_d) pairs.
EstimateReport pool_rubin(std::span<const std::pair<double, double>> estimates);

/// Per completed dataset: full-frame mean and s^2 / N (times 1 - n/N when
/// `finite_population_correction`), pooled by Rubin's rules.
EstimateReport mi_mean(const ImputationSet& imputations, const std::string& outcome,
                       Level level = Level::practice, bool finite_population_correction = false);

struct EfficiencyDiagnostic {
  std::vector<double> se_imputed;
  std::vector<double> per_imputation_ratio;
  double se_original = 0.0;
  double size_ratio = 0.0;
  std::int64_t n_original = 0;
  std::int64_t n_imputed = 0;
};

double size_ratio(std::int64_t n_original, std::int64_t n_imputed);

EfficiencyDiagnostic efficiency_diagnostic(const ImputationSet& imputations,
                                           const StudyDataset& data, const std::string& outcome);

/// Absolute Pearson correlations; empty where a covariate has zero variance.
struct CorrelationRow {
  std::string covariate;
  std::optional<double> observed;  // on the original observed rows
  std::optional<double> minimum;
  std::optional<double> mean;
  std::optional<double> maximum;
  std::optional<double> sd;
};

std::vector<CorrelationRow> correlation_summary(const ImputationSet& imputations,
                                                const std::vector<std::string>& covariates,
                                                const std::string& outcome);

}  // namespace svyimp
