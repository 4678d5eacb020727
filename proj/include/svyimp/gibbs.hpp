#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "svyimp/dataset.hpp"
#include "svyimp/kernels.hpp"
#include "svyimp/random.hpp"

namespace svyimp {

struct ImputationModelSpec {
  std::vector<std::string> outcome_columns;
  std::vector<std::string> predictor_columns;
  /// "cluster_id" (subsidiary, independents as singletons), "parent_id", or
  /// a numeric dataset column.
  std::string cluster_column = "cluster_id";
  std::int64_t n_burn = 500;
  std::int64_t n_between = 100;
  std::int64_t D = 10;
  // Priors live in the standardized space the sampler works in. Unset values
  // default to df = r + 1 and scale = 0.1 x complete-case covariance.
  std::optional<double> prior_df_residual;
  std::optional<Eigen::MatrixXd> prior_scale_residual;
  std::optional<double> prior_df_random;
  std::optional<Eigen::MatrixXd> prior_scale_random;
  Execution execution = Execution::parallel;

  void validate() const;
};

/// Tuning fields only; column lists come from the scenario.
void to_json(nlohmann::json& j, const ImputationModelSpec& s);
void from_json(const nlohmann::json& j, ImputationModelSpec& s);

struct ChainSummary {
  std::string parameter;
  std::size_t length = 0;
  double mean = 0.0;
  double variance = 0.0;
  double lag1_autocorrelation = 0.0;
  /// Autocorrelation at the retention spacing (lag n_between).
  double retained_autocorrelation = 0.0;
};

struct ImputationSet {
  std::vector<StudyDataset> datasets;
  std::vector<ChainSummary> chain_diagnostics;
  std::uint64_t seed = 0;
  std::vector<std::string> imputed_columns;
  std::vector<std::string> dropped_predictors;
  /// The input to the outcome imputation, before any cell was filled.
  StudyDataset original;

  std::size_t D() const { return datasets.size(); }
};

/// Two-level multivariate random-intercept model
///   y_i = B' x_i + b_{c(i)} + e_i,  b ~ N(0, Psi),  e ~ N(0, Sigma),
/// with missing outcome cells treated as parameters. Works on standardized
/// outcomes and predictors.
class GibbsSampler {
 public:
  GibbsSampler(const StudyDataset& data, const ImputationModelSpec& spec, std::uint64_t seed);

  void sweep();
  std::int64_t sweeps() const { return sweeps_; }

  const Eigen::MatrixXd& coefficients() const { return B_; }
  const Eigen::MatrixXd& residual_covariance() const { return sigma_; }
  const Eigen::MatrixXd& random_covariance() const { return psi_; }
  const Eigen::MatrixXd& random_effects() const { return b_; }
  const Eigen::MatrixXd& design() const { return X_; }
  const Eigen::MatrixXd& outcomes() const { return Y_; }

  /// Coefficients on [1, kept predictors] in the original units.
  Eigen::MatrixXd coefficients_original() const;
  Eigen::MatrixXd residual_covariance_original() const;
  Eigen::MatrixXd random_covariance_original() const;
  /// Current completed outcome matrix in original units; observed cells are
  /// the input values unchanged.
  Eigen::MatrixXd completed_original() const;

  const std::vector<std::string>& kept_predictors() const { return kept_; }
  const std::vector<std::string>& dropped_predictors() const { return dropped_; }
  const std::vector<std::int64_t>& cluster_of_row() const { return cluster_; }
  std::int64_t clusters() const { return index_.clusters(); }

 private:
  struct Pattern {
    std::uint64_t mask = 0;  // bit j set when outcome j is missing
    PatternDraw draw;
  };

  void draw_missing();
  void draw_random_effects();
  void draw_coefficients();
  void draw_residual_covariance();
  void draw_random_covariance();

  ImputationModelSpec spec_;
  Rng rng_;
  std::int64_t sweeps_ = 0;
  std::vector<std::string> kept_;
  std::vector<std::string> dropped_;
  std::vector<std::int64_t> cluster_;
  ClusterIndex index_;
  std::vector<std::int64_t> distinct_sizes_;

  Eigen::MatrixXd Y_;        // standardized outcomes, completed
  Eigen::MatrixXd Y_input_;  // original-unit outcomes as given (NaN where missing)
  BoolMatrix missing_;
  Eigen::MatrixXd X_;
  Eigen::MatrixXd xtx_chol_;  // lower Cholesky of X'X
  Eigen::VectorXd y_center_, y_scale_, x_center_, x_scale_;
  std::vector<Pattern> patterns_;

  Eigen::MatrixXd B_, b_, sigma_, psi_;
  double df_residual_ = 0.0, df_random_ = 0.0;
  Eigen::MatrixXd scale_residual_, scale_random_;
};

ImputationSet gibbs_impute(const StudyDataset& data, const ImputationModelSpec& spec,
                           std::uint64_t seed);

/// Step 1 imputes the incomplete extra covariates from the frame covariates
/// and replaces each missing cell by the mean of its D draws; step 2 imputes
/// spec.outcome_columns from frame and completed extra covariates.
ImputationSet two_step_impute(const StudyDataset& data,
                              const std::vector<std::string>& frame_covariates,
                              const std::vector<std::string>& extra_covariates,
                              const ImputationModelSpec& spec, std::uint64_t seed);

enum class Scenario { MI1, MI2 };

std::string_view to_string(Scenario s);
Scenario parse_scenario(std::string_view name);

struct ScenarioColumns {
  std::vector<std::string> frame_covariates;
  std::vector<std::string> extra_covariates;
};

ScenarioColumns scenario(Scenario s);

}  // namespace svyimp
