#include "svyimp/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "svyimp/error.hpp"
#include "svyimp/stats.hpp"

namespace svyimp {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::naive: return "naive";
    case Method::weighted: return "weighted";
    case Method::mi: return "mi";
  }
  return "naive";
}

Method parse_method(std::string_view name) {
  if (name == "naive") return Method::naive;
  if (name == "weighted") return Method::weighted;
  if (name == "mi") return Method::mi;
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

void to_json(nlohmann::json& j, const EstimateReport& r) {
  j = nlohmann::json{{"method", std::string(to_string(r.method))},
                     {"outcome", r.outcome},
                     {"level", std::string(to_string(r.level))},
                     {"mean", r.mean},
                     {"se", r.se},
                     {"n_used", r.n_used}};
  j["scenario"] = r.scenario ? nlohmann::json(std::string(to_string(*r.scenario))) : nlohmann::json();
  if (r.components) {
    j["components"] = {{"var_within", r.components->var_within},
                       {"var_between", r.components->var_between},
                       {"D", r.components->D}};
  }
}

namespace {

const LevelResponses& level_table(const StudyDataset& data, Level level) {
  return level == Level::subsidiary ? data.subsidiaries : data.parents;
}

std::vector<double> observed_values(const StudyDataset& data, const std::string& outcome,
                                    Level level) {
  std::vector<double> out;
  if (level == Level::practice) {
    const auto c = static_cast<Eigen::Index>(data.column_index(outcome));
    for (Eigen::Index i = 0; i < data.values.rows(); ++i)
      if (data.observed(i, c)) out.push_back(data.values(i, c));
    return out;
  }
  const auto m = static_cast<Eigen::Index>(data.column_index(outcome));
  const auto& t = level_table(data, level);
  if (m >= t.outcomes.cols())
    throw ConfigError("outcome '" + outcome + "' has no unit-level values");
  for (Eigen::Index u = 0; u < t.outcomes.rows(); ++u)
    if (!std::isnan(t.outcomes(u, m))) out.push_back(t.outcomes(u, m));
  return out;
}

}  // namespace

EstimateReport naive_mean(const StudyDataset& data, const std::string& outcome, Level level) {
  const auto y = observed_values(data, outcome, level);
  if (y.size() < 2)
    throw InsufficientDataError(fmt::format("naive mean of {}: {} observed values, need 2",
                                            outcome, y.size()));
  EstimateReport r;
  r.method = Method::naive;
  r.outcome = outcome;
  r.level = level;
  r.mean = stats::mean(y);
  r.se = std::sqrt(stats::sample_variance(y) / static_cast<double>(y.size()));
  r.n_used = static_cast<std::int64_t>(y.size());
  return r;
}

std::pair<double, double> ratio_mean_and_variance(std::span<const WeightedObservation> obs) {
  if (obs.empty()) throw InsufficientDataError("weighted mean: no observations");
  double sw = 0.0, swy = 0.0;
  for (const auto& o : obs) {
    sw += o.w;
    swy += o.w * o.y;
  }
  if (!(sw > 0.0)) throw InsufficientDataError("weighted mean: weights sum to zero");
  const double mean = swy / sw;

  std::map<int, std::map<std::int64_t, double>> scores;
  for (const auto& o : obs) scores[o.stratum][o.psu] += o.w * (o.y - mean) / sw;
  double var = 0.0;
  for (const auto& [h, psus] : scores) {
    const auto n_h = static_cast<double>(psus.size());
    if (psus.size() < 2)
      throw DesignError(fmt::format(
          "weighted variance undefined: stratum {} has a single responding first-stage unit", h));
    double z_bar = 0.0;
    for (const auto& [psu, z] : psus) z_bar += z;
    z_bar /= n_h;
    double ss = 0.0;
    for (const auto& [psu, z] : psus) ss += (z - z_bar) * (z - z_bar);
    var += n_h / (n_h - 1.0) * ss;
  }
  return {mean, var};
}

EstimateReport weighted_mean(const StudyDataset& data, const SampleDraw& draw,
                             const std::string& outcome, Level level) {
  std::vector<WeightedObservation> obs;
  if (level == Level::practice) {
    const auto c = static_cast<Eigen::Index>(data.column_index(outcome));
    for (Eigen::Index i = 0; i < data.values.rows(); ++i) {
      if (!data.observed(i, c)) continue;
      const auto* unit = draw.find(data.practice_id[i]);
      if (unit == nullptr)
        throw DesignError(fmt::format("practice {} has an observed {} but no design weight",
                                      data.practice_id[i], outcome));
      obs.push_back({data.values(i, c), unit->weight, unit->stratum, unit->psu});
    }
  } else {
    const auto& units = level == Level::subsidiary ? draw.subsidiaries : draw.parents;
    if (units.empty())
      throw DesignError(fmt::format("design {} has no {} stage", to_string(draw.design),
                                    to_string(level)));
    const auto& t = level_table(data, level);
    const auto m = static_cast<Eigen::Index>(data.column_index(outcome));
    for (std::size_t u = 0; u < t.unit_id.size(); ++u) {
      const double y = t.outcomes(static_cast<Eigen::Index>(u), m);
      if (std::isnan(y)) continue;
      const auto it = std::lower_bound(
          units.begin(), units.end(), t.unit_id[u],
          [](const SelectedUnit& s, std::int64_t id) { return s.id < id; });
      if (it == units.end() || it->id != t.unit_id[u])
        throw DesignError(fmt::format("{} {} responded but has no design weight",
                                      to_string(level), t.unit_id[u]));
      obs.push_back({y, 1.0 / it->pi, it->stratum, it->psu});
    }
  }
  if (obs.empty())
    throw InsufficientDataError(fmt::format("weighted mean of {}: no responding units", outcome));
  const auto [mean, var] = ratio_mean_and_variance(obs);
  EstimateReport r;
  r.method = Method::weighted;
  r.outcome = outcome;
  r.level = level;
  r.mean = mean;
  r.se = std::sqrt(var);
  r.n_used = static_cast<std::int64_t>(obs.size());
  return r;
}

EstimateReport pool_rubin(std::span<const std::pair<double, double>> estimates) {
  const auto d = estimates.size();
  if (d < 2) throw PoolingError(fmt::format("Rubin pooling needs D >= 2, got {}", d));
  const double dd = static_cast<double>(d);
  // Shifted by the first estimate so identical estimates pool to exactly
  // that value with zero between-imputation variance.
  const double shift = estimates.front().first;
  double offset = 0.0, within = 0.0;
  for (const auto& [m, v] : estimates) {
    offset += m - shift;
    within += v;
  }
  const double mean = shift + offset / dd;
  within /= dd;
  double between = 0.0;
  for (const auto& [m, v] : estimates) between += (m - mean) * (m - mean);
  between /= dd - 1.0;
  EstimateReport r;
  r.method = Method::mi;
  r.mean = mean;
  r.se = std::sqrt(within + (1.0 + 1.0 / dd) * between);
  r.components = RubinComponents{within, between, static_cast<std::int64_t>(d)};
  return r;
}

namespace {

/// Values entering the completed-data mean at a level: practice values, or
/// per-unit means over the unit's practices.
std::vector<double> completed_units(const StudyDataset& ds, Eigen::Index c, Level level) {
  std::vector<double> out;
  if (level == Level::practice) {
    out.reserve(ds.rows());
    for (Eigen::Index i = 0; i < ds.values.rows(); ++i) out.push_back(ds.values(i, c));
    return out;
  }
  const auto& key = level == Level::subsidiary ? ds.subsidiary_id : ds.parent_id;
  std::map<std::int64_t, std::pair<double, std::int64_t>> groups;
  for (std::size_t i = 0; i < key.size(); ++i) {
    if (key[i] < 0) continue;
    auto& g = groups[key[i]];
    g.first += ds.values(static_cast<Eigen::Index>(i), c);
    ++g.second;
  }
  for (const auto& [id, g] : groups) out.push_back(g.first / static_cast<double>(g.second));
  return out;
}

}  // namespace

EstimateReport mi_mean(const ImputationSet& imputations, const std::string& outcome, Level level,
                       bool finite_population_correction) {
  std::vector<std::pair<double, double>> per;
  std::int64_t n_used = 0;
  std::int64_t n_respondents = 0;
  if (finite_population_correction) {
    n_respondents = static_cast<std::int64_t>(
        observed_values(imputations.original, outcome, level).size());
  }
  for (const auto& ds : imputations.datasets) {
    const auto c = static_cast<Eigen::Index>(ds.column_index(outcome));
    const auto y = completed_units(ds, c, level);
    if (y.size() < 2) throw InsufficientDataError("mi mean: fewer than 2 units");
    for (double v : y)
      if (std::isnan(v))
        throw InsufficientDataError("mi mean: completed dataset still has missing " + outcome);
    const double n = static_cast<double>(y.size());
    double var = stats::sample_variance(y) / n;
    if (finite_population_correction) var *= 1.0 - static_cast<double>(n_respondents) / n;
    per.emplace_back(stats::mean(y), var);
    n_used = static_cast<std::int64_t>(y.size());
  }
  EstimateReport r = pool_rubin(per);
  r.outcome = outcome;
  r.level = level;
  r.n_used = n_used;
  return r;
}

double size_ratio(std::int64_t n_original, std::int64_t n_imputed) {
  if (n_original <= 0 || n_imputed <= 0)
    throw InsufficientDataError("size ratio needs positive sample sizes");
  return std::sqrt(static_cast<double>(n_original) / static_cast<double>(n_imputed));
}

EfficiencyDiagnostic efficiency_diagnostic(const ImputationSet& imputations,
                                           const StudyDataset& data, const std::string& outcome) {
  const auto original = naive_mean(data, outcome);
  EfficiencyDiagnostic out;
  out.se_original = original.se;
  out.n_original = original.n_used;
  for (const auto& ds : imputations.datasets) {
    const auto rep = naive_mean(ds, outcome);
    out.se_imputed.push_back(rep.se);
    out.per_imputation_ratio.push_back(rep.se / original.se);
    out.n_imputed = rep.n_used;
  }
  if (out.se_imputed.empty()) throw PoolingError("efficiency diagnostic: no imputed datasets");
  out.size_ratio = size_ratio(out.n_original, out.n_imputed);
  return out;
}

std::vector<CorrelationRow> correlation_summary(const ImputationSet& imputations,
                                                const std::vector<std::string>& covariates,
                                                const std::string& outcome) {
  std::vector<CorrelationRow> rows;
  const auto& orig = imputations.original;
  const auto yc = static_cast<Eigen::Index>(orig.column_index(outcome));
  for (const auto& name : covariates) {
    CorrelationRow row;
    row.covariate = name;
    const auto xc = static_cast<Eigen::Index>(orig.column_index(name));
    std::vector<double> x, y;
    for (Eigen::Index i = 0; i < orig.values.rows(); ++i) {
      if (!orig.observed(i, yc) || !orig.observed(i, xc)) continue;
      x.push_back(orig.values(i, xc));
      y.push_back(orig.values(i, yc));
    }
    if (const auto r = stats::pearson(x, y)) row.observed = std::abs(*r);

    std::vector<double> per;
    bool defined = !imputations.datasets.empty();
    for (const auto& ds : imputations.datasets) {
      std::vector<double> dx, dy;
      const auto dxc = static_cast<Eigen::Index>(ds.column_index(name));
      const auto dyc = static_cast<Eigen::Index>(ds.column_index(outcome));
      for (Eigen::Index i = 0; i < ds.values.rows(); ++i) {
        if (!ds.observed(i, dyc) || !ds.observed(i, dxc)) continue;
        dx.push_back(ds.values(i, dxc));
        dy.push_back(ds.values(i, dyc));
      }
      const auto r = stats::pearson(dx, dy);
      if (!r) {
        defined = false;
        break;
      }
      per.push_back(std::abs(*r));
    }
    if (defined) {
      row.minimum = *std::min_element(per.begin(), per.end());
      row.maximum = *std::max_element(per.begin(), per.end());
      row.mean = stats::mean(per);
      row.sd = per.size() > 1 ? std::sqrt(stats::sample_variance(per)) : 0.0;
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace svyimp
