#include <algorithm>

#include <fmt/format.h>

#include "svyimp/error.hpp"
#include "svyimp/gibbs.hpp"
#include "svyimp/stats.hpp"

namespace svyimp {

namespace {

ChainSummary summarize(const std::string& name, const std::vector<double>& trace,
                       std::int64_t n_between) {
  ChainSummary s;
  s.parameter = name;
  s.length = trace.size();
  if (trace.empty()) return s;
  s.mean = stats::mean(trace);
  s.variance = trace.size() > 1 ? stats::sample_variance(trace) : 0.0;
  s.lag1_autocorrelation = stats::autocorrelation(trace, 1);
  s.retained_autocorrelation = stats::autocorrelation(trace, static_cast<std::size_t>(n_between));
  return s;
}

void check_columns(const StudyDataset& data, const std::vector<std::string>& names) {
  for (const auto& name : names) (void)data.column_index(name);
}

}  // namespace

ImputationSet gibbs_impute(const StudyDataset& data, const ImputationModelSpec& spec,
                           std::uint64_t seed) {
  spec.validate();
  check_columns(data, spec.outcome_columns);
  check_columns(data, spec.predictor_columns);
  ImputationSet set;
  set.seed = seed;
  set.imputed_columns = spec.outcome_columns;
  set.original = data;

  std::size_t missing = 0;
  for (const auto& name : spec.outcome_columns) missing += data.missing_count(data.column_index(name));
  if (missing == 0) {
    set.datasets.assign(static_cast<std::size_t>(spec.D), data);
    return set;
  }

  GibbsSampler sampler(data, spec, seed);
  set.dropped_predictors = sampler.dropped_predictors();
  const auto r = spec.outcome_columns.size();
  std::vector<std::vector<double>> sigma_trace(r), psi_trace(r);
  std::vector<Eigen::Index> cols;
  for (const auto& name : spec.outcome_columns)
    cols.push_back(static_cast<Eigen::Index>(data.column_index(name)));

  const auto total = spec.n_burn + (spec.D - 1) * spec.n_between;
  for (std::int64_t s = 1; s <= total; ++s) {
    sampler.sweep();
    if (s < spec.n_burn) continue;
    const auto sigma = sampler.residual_covariance_original();
    const auto psi = sampler.random_covariance_original();
    for (std::size_t j = 0; j < r; ++j) {
      sigma_trace[j].push_back(sigma(j, j));
      psi_trace[j].push_back(psi(j, j));
    }
    if ((s - spec.n_burn) % spec.n_between != 0) continue;
    StudyDataset completed = data;
    const Eigen::MatrixXd y = sampler.completed_original();
    for (std::size_t j = 0; j < r; ++j) {
      const auto c = cols[j];
      for (Eigen::Index i = 0; i < y.rows(); ++i) {
        if (data.observed(i, c)) continue;
        completed.values(i, c) = y(i, static_cast<Eigen::Index>(j));
        completed.observed(i, c) = true;
      }
    }
    set.datasets.push_back(std::move(completed));
  }
  for (std::size_t j = 0; j < r; ++j) {
    set.chain_diagnostics.push_back(
        summarize(fmt::format("sigma[{}]", spec.outcome_columns[j]), sigma_trace[j], spec.n_between));
    set.chain_diagnostics.push_back(
        summarize(fmt::format("psi[{}]", spec.outcome_columns[j]), psi_trace[j], spec.n_between));
  }
  return set;
}

ImputationSet two_step_impute(const StudyDataset& data,
                              const std::vector<std::string>& frame_covariates,
                              const std::vector<std::string>& extra_covariates,
                              const ImputationModelSpec& spec, std::uint64_t seed) {
  StudyDataset working = data;
  std::vector<std::string> incomplete;
  for (const auto& name : extra_covariates)
    if (data.missing_count(data.column_index(name)) > 0) incomplete.push_back(name);

  if (!incomplete.empty()) {
    ImputationModelSpec step1 = spec;
    step1.outcome_columns = incomplete;
    step1.predictor_columns = frame_covariates;
    ImputationSet first;
    try {
      first = gibbs_impute(data, step1, derive_seed(seed, "step1"));
    } catch (const Error& e) {
      e.rethrow_with_context("step 1: ");
    }
    const double d = static_cast<double>(first.D());
    for (const auto& name : incomplete) {
      const auto c = static_cast<Eigen::Index>(data.column_index(name));
      for (Eigen::Index i = 0; i < working.values.rows(); ++i) {
        if (data.observed(i, c)) continue;
        double total = 0.0;
        for (const auto& ds : first.datasets) total += ds.values(i, c);
        working.values(i, c) = total / d;
        working.observed(i, c) = true;
      }
    }
  }

  ImputationModelSpec step2 = spec;
  if (step2.outcome_columns.empty()) step2.outcome_columns = data.outcome_columns();
  step2.predictor_columns = frame_covariates;
  step2.predictor_columns.insert(step2.predictor_columns.end(), extra_covariates.begin(),
                                 extra_covariates.end());
  ImputationSet out;
  try {
    out = gibbs_impute(working, step2, seed);
  } catch (const Error& e) {
    e.rethrow_with_context("step 2: ");
  }
  out.original = data;
  return out;
}

std::string_view to_string(Scenario s) { return s == Scenario::MI1 ? "MI1" : "MI2"; }

Scenario parse_scenario(std::string_view name) {
  if (name == "MI1") return Scenario::MI1;
  if (name == "MI2") return Scenario::MI2;
  throw ConfigError("unknown scenario '" + std::string(name) + "' (expected MI1 or MI2)");
}

ScenarioColumns scenario(Scenario s) {
  ScenarioColumns out;
  for (auto name : kFrameCovariates) out.frame_covariates.emplace_back(name);
  if (s == Scenario::MI2) out.extra_covariates = claims_model_columns();
  return out;
}

}  // namespace svyimp
