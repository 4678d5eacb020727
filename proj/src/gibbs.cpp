#include "svyimp/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "svyimp/error.hpp"
#include "svyimp/json_util.hpp"

namespace svyimp {

void ImputationModelSpec::validate() const {
  if (D < 2) throw ConfigError("imputation.D: must be >= 2");
  if (n_burn < 1) throw ConfigError("imputation.n_burn: must be >= 1");
  if (n_between < 1) throw ConfigError("imputation.n_between: must be >= 1");
  if (outcome_columns.size() > 64)
    throw ConfigError("imputation: at most 64 outcome columns are supported");
}

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const std::string& where) {
  std::vector<std::vector<double>> rows;
  try {
    rows = j.get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + ": expected a square array of numbers");
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != n)
      throw ConfigError(where + ": matrix must be square");
    for (Eigen::Index k = 0; k < n; ++k) m(i, k) = rows[i][k];
  }
  return m;
}

}  // namespace

void to_json(nlohmann::json& j, const ImputationModelSpec& s) {
  j = nlohmann::json{{"n_burn", s.n_burn},
                     {"n_between", s.n_between},
                     {"D", s.D},
                     {"cluster_column", s.cluster_column},
                     {"execution", s.execution == Execution::serial ? "serial" : "parallel"}};
  if (s.prior_df_residual) j["prior_df_residual"] = *s.prior_df_residual;
  if (s.prior_df_random) j["prior_df_random"] = *s.prior_df_random;
  if (s.prior_scale_residual) j["prior_scale_residual"] = matrix_to_json(*s.prior_scale_residual);
  if (s.prior_scale_random) j["prior_scale_random"] = matrix_to_json(*s.prior_scale_random);
}

void from_json(const nlohmann::json& j, ImputationModelSpec& s) {
  json_util::require_keys(j, "imputation",
                          {"n_burn", "n_between", "D", "cluster_column", "execution",
                           "prior_df_residual", "prior_df_random", "prior_scale_residual",
                           "prior_scale_random"});
  json_util::get_to(j, "imputation", "n_burn", s.n_burn);
  json_util::get_to(j, "imputation", "n_between", s.n_between);
  json_util::get_to(j, "imputation", "D", s.D);
  json_util::get_to(j, "imputation", "cluster_column", s.cluster_column);
  if (j.contains("execution")) {
    std::string e;
    json_util::get_to(j, "imputation", "execution", e);
    if (e == "serial") {
      s.execution = Execution::serial;
    } else if (e == "parallel") {
      s.execution = Execution::parallel;
    } else {
      throw ConfigError("imputation.execution: expected 'serial' or 'parallel'");
    }
  }
  if (j.contains("prior_df_residual")) {
    double v = 0.0;
    json_util::get_to(j, "imputation", "prior_df_residual", v);
    s.prior_df_residual = v;
  }
  if (j.contains("prior_df_random")) {
    double v = 0.0;
    json_util::get_to(j, "imputation", "prior_df_random", v);
    s.prior_df_random = v;
  }
  if (j.contains("prior_scale_residual"))
    s.prior_scale_residual =
        matrix_from_json(j.at("prior_scale_residual"), "imputation.prior_scale_residual");
  if (j.contains("prior_scale_random"))
    s.prior_scale_random =
        matrix_from_json(j.at("prior_scale_random"), "imputation.prior_scale_random");
}

namespace {

bool is_spd(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || !m.isApprox(m.transpose(), 1e-10)) return false;
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  return llt.info() == Eigen::Success;
}

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& m, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw NumericalError(fmt::format("{} is not positive definite", what));
  Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
  return 0.5 * (inv + inv.transpose());
}

Eigen::MatrixXd covariance(const Eigen::MatrixXd& m) {
  const Eigen::RowVectorXd mu = m.colwise().mean();
  const Eigen::MatrixXd c = m.rowwise() - mu;
  return (c.transpose() * c) / static_cast<double>(std::max<Eigen::Index>(m.rows() - 1, 1));
}

Eigen::MatrixXd standard_normals(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd z(rows, cols);
  fill_normal(rng, std::span<double>(z.data(), static_cast<std::size_t>(z.size())));
  return z;
}

std::vector<std::int64_t> resolve_clusters(const StudyDataset& data, const std::string& column) {
  const auto n = data.rows();
  std::vector<std::string> labels(n);
  if (column == "cluster_id") {
    labels = data.cluster_id;
  } else if (column == "parent_id") {
    for (std::size_t i = 0; i < n; ++i)
      labels[i] = data.parent_id[i] >= 0 ? fmt::format("C{}", data.parent_id[i])
                                         : fmt::format("P{}", data.practice_id[i]);
  } else {
    const auto c = static_cast<Eigen::Index>(data.column_index(column));
    for (std::size_t i = 0; i < n; ++i) {
      if (!data.observed(static_cast<Eigen::Index>(i), c))
        throw ConfigError("cluster column '" + column + "' has missing cells");
      labels[i] = fmt::format("{}", data.values(static_cast<Eigen::Index>(i), c));
    }
  }
  std::unordered_map<std::string, std::int64_t> ids;
  std::vector<std::int64_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto [it, inserted] = ids.emplace(labels[i], static_cast<std::int64_t>(ids.size()));
    out[i] = it->second;
  }
  return out;
}

}  // namespace

GibbsSampler::GibbsSampler(const StudyDataset& data, const ImputationModelSpec& spec,
                           std::uint64_t seed)
    : spec_(spec), rng_(seed) {
  spec_.validate();
  if (spec_.outcome_columns.empty()) throw ConfigError("imputation: no outcome columns");
  const auto n = static_cast<Eigen::Index>(data.rows());
  const auto r = static_cast<Eigen::Index>(spec_.outcome_columns.size());
  if (n == 0) throw InsufficientDataError("imputation: dataset has no rows");

  // Outcomes, standardized by their observed moments.
  Y_input_.resize(n, r);
  missing_.resize(n, r);
  y_center_.resize(r);
  y_scale_.resize(r);
  Y_.resize(n, r);
  for (Eigen::Index j = 0; j < r; ++j) {
    const auto c = static_cast<Eigen::Index>(data.column_index(spec_.outcome_columns[j]));
    Y_input_.col(j) = data.values.col(c);
    missing_.col(j) = !data.observed.col(c);
    std::vector<double> obs;
    for (Eigen::Index i = 0; i < n; ++i)
      if (!missing_(i, j)) obs.push_back(Y_input_(i, j));
    if (obs.empty())
      throw InsufficientDataError("imputation: outcome column '" + spec_.outcome_columns[j] +
                                  "' has no observed values");
    double mu = 0.0;
    for (double v : obs) mu += v;
    mu /= static_cast<double>(obs.size());
    double var = 0.0;
    for (double v : obs) var += (v - mu) * (v - mu);
    const double sd = obs.size() > 1 ? std::sqrt(var / static_cast<double>(obs.size() - 1)) : 0.0;
    y_center_(j) = mu;
    y_scale_(j) = sd > 0.0 ? sd : 1.0;
    for (Eigen::Index i = 0; i < n; ++i)
      Y_(i, j) = missing_(i, j) ? 0.0 : (Y_input_(i, j) - mu) / y_scale_(j);
  }

  // Predictors: standardized, then a greedy rank-revealing pass drops any
  // column in the span of the intercept and the columns kept before it.
  std::vector<Eigen::VectorXd> cols;
  std::vector<double> centers, scales;
  Eigen::MatrixXd kept_x = Eigen::MatrixXd::Ones(n, 1);
  for (const auto& name : spec_.predictor_columns) {
    if (std::find(spec_.outcome_columns.begin(), spec_.outcome_columns.end(), name) !=
        spec_.outcome_columns.end())
      throw ConfigError("imputation: column '" + name + "' is both outcome and predictor");
    const auto c = static_cast<Eigen::Index>(data.column_index(name));
    if (!data.observed.col(c).all())
      throw ConfigError("imputation: predictor column '" + name + "' has missing cells");
    Eigen::VectorXd x = data.values.col(c);
    const double mu = x.mean();
    const double sd = n > 1 ? std::sqrt((x.array() - mu).square().sum() / static_cast<double>(n - 1)) : 0.0;
    if (!(sd > 0.0)) {
      dropped_.push_back(name);
      continue;
    }
    Eigen::VectorXd z = (x.array() - mu) / sd;
    Eigen::MatrixXd candidate(n, kept_x.cols() + 1);
    candidate << kept_x, z;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(candidate);
    qr.setThreshold(1e-9);
    if (qr.rank() < candidate.cols()) {
      dropped_.push_back(name);
      continue;
    }
    kept_x = std::move(candidate);
    kept_.push_back(name);
    centers.push_back(mu);
    scales.push_back(sd);
  }
  X_ = std::move(kept_x);
  x_center_ = Eigen::Map<const Eigen::VectorXd>(centers.data(), static_cast<Eigen::Index>(centers.size()));
  x_scale_ = Eigen::Map<const Eigen::VectorXd>(scales.data(), static_cast<Eigen::Index>(scales.size()));
  const Eigen::MatrixXd xtx = cross_product(spec_.execution, X_, X_);
  Eigen::LLT<Eigen::MatrixXd> xtx_llt(xtx);
  if (xtx_llt.info() != Eigen::Success)
    throw NumericalError(fmt::format("imputation: X'X is singular for predictors [{}]",
                                     fmt::join(kept_, ", ")));
  xtx_chol_ = xtx_llt.matrixL();

  // Clusters.
  cluster_ = resolve_clusters(data, spec_.cluster_column);
  const auto n_clusters = *std::max_element(cluster_.begin(), cluster_.end()) + 1;
  index_ = ClusterIndex::build(cluster_, n_clusters);
  bool has_pair = false;
  for (std::int64_t c = 0; c < n_clusters; ++c) {
    has_pair = has_pair || index_.size(c) >= 2;
    distinct_sizes_.push_back(index_.size(c));
  }
  if (!has_pair)
    throw DegenerateDesignError("imputation: every value of cluster column '" +
                                spec_.cluster_column + "' is unique");
  std::sort(distinct_sizes_.begin(), distinct_sizes_.end());
  distinct_sizes_.erase(std::unique(distinct_sizes_.begin(), distinct_sizes_.end()),
                        distinct_sizes_.end());

  // Missingness patterns, in ascending mask order.
  std::map<std::uint64_t, std::vector<std::int64_t>> by_mask;
  for (Eigen::Index i = 0; i < n; ++i) {
    std::uint64_t mask = 0;
    for (Eigen::Index j = 0; j < r; ++j)
      if (missing_(i, j)) mask |= std::uint64_t{1} << j;
    if (mask != 0) by_mask[mask].push_back(i);
  }
  for (auto& [mask, rows] : by_mask) {
    Pattern p;
    p.mask = mask;
    p.draw.rows = std::move(rows);
    for (int j = 0; j < r; ++j) {
      if (mask & (std::uint64_t{1} << j)) {
        p.draw.missing.push_back(j);
      } else {
        p.draw.observed.push_back(j);
      }
    }
    patterns_.push_back(std::move(p));
  }

  // Starting values: least squares on complete cases (all rows when there
  // are too few), covariances split from the residual covariance.
  std::vector<Eigen::Index> complete;
  for (Eigen::Index i = 0; i < n; ++i)
    if (!missing_.row(i).any()) complete.push_back(i);
  const auto p_cols = X_.cols();
  Eigen::MatrixXd Xc = X_, Yc = Y_;
  if (static_cast<Eigen::Index>(complete.size()) > p_cols + r + 1) {
    Xc = X_(complete, Eigen::all);
    Yc = Y_(complete, Eigen::all);
  }
  Eigen::LLT<Eigen::MatrixXd> cc_llt(Xc.transpose() * Xc);
  if (cc_llt.info() != Eigen::Success) {
    Xc = X_;
    Yc = Y_;
    cc_llt.compute(Xc.transpose() * Xc);
  }
  B_ = cc_llt.solve(Xc.transpose() * Yc);
  Eigen::MatrixXd resid_cov = covariance(Yc - Xc * B_);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(r, r);
  if (!is_spd(resid_cov)) resid_cov = eye;
  sigma_ = 0.5 * resid_cov + 1e-6 * eye;
  psi_ = 0.5 * resid_cov + 1e-6 * eye;
  b_ = Eigen::MatrixXd::Zero(n_clusters, r);

  // Priors.
  Eigen::MatrixXd cc_cov = eye;
  if (static_cast<Eigen::Index>(complete.size()) > r + 1) {
    cc_cov = covariance(Y_(complete, Eigen::all));
    if (!is_spd(cc_cov)) cc_cov = eye;
  }
  const double dim = static_cast<double>(r);
  df_residual_ = spec_.prior_df_residual.value_or(dim + 1.0);
  df_random_ = spec_.prior_df_random.value_or(dim + 1.0);
  if (df_residual_ < dim) throw ConfigError("imputation.prior_df_residual: must be >= dimension");
  if (df_random_ < dim) throw ConfigError("imputation.prior_df_random: must be >= dimension");
  scale_residual_ = spec_.prior_scale_residual.value_or(0.1 * cc_cov);
  scale_random_ = spec_.prior_scale_random.value_or(0.1 * cc_cov);
  if (scale_residual_.rows() != r || !is_spd(scale_residual_))
    throw ConfigError("imputation.prior_scale_residual: must be a symmetric positive definite r x r matrix");
  if (scale_random_.rows() != r || !is_spd(scale_random_))
    throw ConfigError("imputation.prior_scale_random: must be a symmetric positive definite r x r matrix");
}

void GibbsSampler::sweep() {
  draw_missing();
  draw_random_effects();
  draw_coefficients();
  draw_residual_covariance();
  draw_random_covariance();
  ++sweeps_;
}

void GibbsSampler::draw_missing() {
  if (patterns_.empty()) return;
  Eigen::MatrixXd mean = X_ * B_;
  for (Eigen::Index i = 0; i < mean.rows(); ++i) mean.row(i) += b_.row(cluster_[i]);
  for (auto& p : patterns_) {
    auto& d = p.draw;
    const auto n_mis = static_cast<Eigen::Index>(d.missing.size());
    const Eigen::MatrixXd s_mm = sigma_(d.missing, d.missing);
    Eigen::MatrixXd cond = s_mm;
    if (!d.observed.empty()) {
      const Eigen::MatrixXd s_oo = sigma_(d.observed, d.observed);
      const Eigen::MatrixXd s_mo = sigma_(d.missing, d.observed);
      Eigen::LLT<Eigen::MatrixXd> llt(s_oo);
      if (llt.info() != Eigen::Success) {
        std::vector<std::string> names;
        for (int o : d.observed) names.push_back(spec_.outcome_columns[o]);
        throw NumericalError(fmt::format("singular conditional covariance for columns [{}]",
                                         fmt::join(names, ", ")));
      }
      d.regression = llt.solve(s_mo.transpose()).transpose();
      cond = s_mm - d.regression * s_mo.transpose();
    } else {
      d.regression.resize(n_mis, 0);
    }
    cond = 0.5 * (cond + cond.transpose());
    Eigen::LLT<Eigen::MatrixXd> cllt(cond);
    if (cllt.info() != Eigen::Success) {
      std::vector<std::string> names;
      for (int m : d.missing) names.push_back(spec_.outcome_columns[m]);
      throw NumericalError(fmt::format("singular conditional covariance for columns [{}]",
                                       fmt::join(names, ", ")));
    }
    d.cond_chol = cllt.matrixL();
    const Eigen::MatrixXd z =
        standard_normals(rng_, n_mis, static_cast<Eigen::Index>(d.rows.size()));
    impute_rows(spec_.execution, Y_, mean, d, z);
  }
}

void GibbsSampler::draw_random_effects() {
  const auto r = Y_.cols();
  const Eigen::MatrixXd resid = Y_ - X_ * B_;
  const Eigen::MatrixXd sums = cluster_sums(spec_.execution, index_, resid);
  const Eigen::MatrixXd sigma_inv = spd_inverse(sigma_, "residual covariance");
  const Eigen::MatrixXd psi_inv = spd_inverse(psi_, "random-intercept covariance");

  // Posterior precision depends on the cluster only through its size.
  std::unordered_map<std::int64_t, std::pair<Eigen::MatrixXd, Eigen::MatrixXd>> by_size;
  for (auto size : distinct_sizes_) {
    const Eigen::MatrixXd precision = psi_inv + static_cast<double>(size) * sigma_inv;
    const Eigen::MatrixXd cov = spd_inverse(precision, "random-intercept posterior precision");
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    by_size.emplace(size, std::make_pair(Eigen::MatrixXd(cov * sigma_inv), Eigen::MatrixXd(llt.matrixL())));
  }
  const Eigen::MatrixXd z = standard_normals(rng_, r, b_.rows());
  for (Eigen::Index c = 0; c < b_.rows(); ++c) {
    const auto& [gain, chol] = by_size.at(index_.size(c));
    b_.row(c) = (gain * sums.row(c).transpose() + chol * z.col(c)).transpose();
  }
}

void GibbsSampler::draw_coefficients() {
  Eigen::MatrixXd target = Y_;
  for (Eigen::Index i = 0; i < target.rows(); ++i) target.row(i) -= b_.row(cluster_[i]);
  const Eigen::MatrixXd xty = cross_product(spec_.execution, X_, target);
  const auto lower = xtx_chol_.triangularView<Eigen::Lower>();
  const auto upper = xtx_chol_.transpose().triangularView<Eigen::Upper>();
  const Eigen::MatrixXd b_hat = upper.solve(lower.solve(xty));
  const Eigen::MatrixXd z = standard_normals(rng_, X_.cols(), Y_.cols());
  Eigen::LLT<Eigen::MatrixXd> s_llt(sigma_);
  if (s_llt.info() != Eigen::Success) throw NumericalError("residual covariance is not positive definite");
  const Eigen::MatrixXd row_part = upper.solve(z);
  B_ = b_hat + row_part * Eigen::MatrixXd(s_llt.matrixL()).transpose();
}

void GibbsSampler::draw_residual_covariance() {
  Eigen::MatrixXd e = Y_ - X_ * B_;
  for (Eigen::Index i = 0; i < e.rows(); ++i) e.row(i) -= b_.row(cluster_[i]);
  const Eigen::MatrixXd scale = scale_residual_ + cross_product(spec_.execution, e, e);
  sigma_ = draw_inverse_wishart(rng_, df_residual_ + static_cast<double>(e.rows()), scale);
}

void GibbsSampler::draw_random_covariance() {
  const Eigen::MatrixXd scale = scale_random_ + b_.transpose() * b_;
  psi_ = draw_inverse_wishart(rng_, df_random_ + static_cast<double>(b_.rows()), scale);
}

Eigen::MatrixXd GibbsSampler::coefficients_original() const {
  Eigen::MatrixXd out(B_.rows(), B_.cols());
  for (Eigen::Index j = 0; j < B_.cols(); ++j) {
    double intercept = B_(0, j);
    for (Eigen::Index k = 1; k < B_.rows(); ++k) {
      out(k, j) = y_scale_(j) * B_(k, j) / x_scale_(k - 1);
      intercept -= B_(k, j) * x_center_(k - 1) / x_scale_(k - 1);
    }
    out(0, j) = y_center_(j) + y_scale_(j) * intercept;
  }
  return out;
}

Eigen::MatrixXd GibbsSampler::residual_covariance_original() const {
  return y_scale_.asDiagonal() * sigma_ * y_scale_.asDiagonal();
}

Eigen::MatrixXd GibbsSampler::random_covariance_original() const {
  return y_scale_.asDiagonal() * psi_ * y_scale_.asDiagonal();
}

Eigen::MatrixXd GibbsSampler::completed_original() const {
  Eigen::MatrixXd out = Y_input_;
  for (Eigen::Index j = 0; j < out.cols(); ++j)
    for (Eigen::Index i = 0; i < out.rows(); ++i)
      if (missing_(i, j)) out(i, j) = y_center_(j) + y_scale_(j) * Y_(i, j);
  return out;
}

}  // namespace svyimp
