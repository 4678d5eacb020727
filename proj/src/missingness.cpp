#include "svyimp/missingness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/tools/roots.hpp>
#include <fmt/format.h>

#include "svyimp/error.hpp"
#include "svyimp/json_util.hpp"
#include "svyimp/random.hpp"
#include "svyimp/stats.hpp"

namespace svyimp {

void ResponseModel::validate() const {
  if (!level_targets.count(Level::practice))
    throw ConfigError("response.targets.practice: required");
  for (const auto& [level, target] : level_targets)
    if (!(target > 0.0 && target <= 1.0))
      throw ConfigError(fmt::format("response.targets.{}: must be in (0, 1]", to_string(level)));
  for (const auto& [name, slope] : coefficients) {
    const bool known = std::find(kFrameCovariates.begin(), kFrameCovariates.end(), name) !=
                       kFrameCovariates.end();
    if (!known) throw ConfigError("response.slopes: unknown frame covariate '" + name + "'");
    if (!std::isfinite(slope)) throw ConfigError("response.slopes." + name + ": must be finite");
  }
}

bool ResponseModel::calibrated() const {
  return std::all_of(level_targets.begin(), level_targets.end(),
                     [&](const auto& kv) { return intercepts.count(kv.first) > 0; });
}

void to_json(nlohmann::json& j, const ResponseModel& m) {
  nlohmann::json targets = nlohmann::json::object();
  for (const auto& [level, t] : m.level_targets) targets[std::string(to_string(level))] = t;
  j = nlohmann::json{{"targets", targets}, {"slopes", m.coefficients}};
  if (!m.intercepts.empty()) {
    nlohmann::json icpt = nlohmann::json::object();
    for (const auto& [level, a] : m.intercepts)
      icpt[std::string(to_string(level))] = std::isinf(a) ? nlohmann::json("inf") : nlohmann::json(a);
    j["intercepts"] = icpt;
  }
}

void from_json(const nlohmann::json& j, ResponseModel& m) {
  json_util::require_keys(j, "response", {"targets", "slopes"});
  if (j.contains("targets")) {
    const auto& t = j.at("targets");
    if (!t.is_object()) throw ConfigError("response.targets: expected an object");
    m.level_targets.clear();
    for (const auto& item : t.items()) {
      double v = 0.0;
      json_util::get_to(t, "response.targets", item.key().c_str(), v);
      m.level_targets[parse_level(item.key())] = v;
    }
  }
  if (j.contains("slopes")) {
    const auto& s = j.at("slopes");
    if (!s.is_object()) throw ConfigError("response.slopes: expected an object");
    m.coefficients.clear();
    for (const auto& item : s.items()) {
      double v = 0.0;
      json_util::get_to(s, "response.slopes", item.key().c_str(), v);
      m.coefficients[item.key()] = v;
    }
  }
}

namespace {

double linear_predictor(const Frame& frame, const ResponseModel& model, Level level,
                        std::int64_t unit_id) {
  double eta = 0.0;
  for (const auto& [name, slope] : model.coefficients)
    if (slope != 0.0) eta += slope * unit_covariate(frame, level, unit_id, name);
  return eta;
}

}  // namespace

double response_probability(const Frame& frame, const ResponseModel& model, Level level,
                            std::int64_t unit_id) {
  const auto it = model.intercepts.find(level);
  if (it == model.intercepts.end())
    throw CalibrationError(fmt::format("response model has no intercept for {}", to_string(level)));
  if (std::isinf(it->second)) return it->second > 0 ? 1.0 : 0.0;
  return stats::logistic(it->second + linear_predictor(frame, model, level, unit_id));
}

std::vector<std::int64_t> selected_units(const SampleDraw& draw, Level level) {
  std::vector<std::int64_t> ids;
  switch (level) {
    case Level::practice:
      for (const auto& u : draw.units) ids.push_back(u.practice_id);
      break;
    case Level::subsidiary:
      for (const auto& u : draw.subsidiaries) ids.push_back(u.id);
      break;
    case Level::parent:
      for (const auto& u : draw.parents) ids.push_back(u.id);
      break;
  }
  return ids;
}

double expected_response_rate(const Frame& frame, const SampleDraw& draw,
                              const ResponseModel& model, Level level) {
  const auto ids = selected_units(draw, level);
  if (ids.empty()) throw InsufficientDataError("no selected units at " + std::string(to_string(level)));
  double total = 0.0;
  for (auto id : ids) total += response_probability(frame, model, level, id);
  return total / static_cast<double>(ids.size());
}

ResponseModel calibrate_response_model(const Frame& frame, const SampleDraw& draw,
                                       const ResponseModel& model) {
  model.validate();
  ResponseModel out = model;
  out.intercepts.clear();
  for (const auto& [level, target] : model.level_targets) {
    if (target >= 1.0) {
      out.intercepts[level] = std::numeric_limits<double>::infinity();
      continue;
    }
    const auto ids = selected_units(draw, level);
    if (ids.empty()) {
      // Nothing to calibrate on; the slope-free intercept is the natural value.
      out.intercepts[level] = stats::logit(target);
      continue;
    }
    std::vector<double> eta;
    eta.reserve(ids.size());
    double max_abs = 0.0;
    for (auto id : ids) {
      eta.push_back(linear_predictor(frame, model, level, id));
      if (!std::isfinite(eta.back()))
        throw CalibrationError(fmt::format("{}: non-finite linear predictor", to_string(level)));
      max_abs = std::max(max_abs, std::abs(eta.back()));
    }
    auto residual = [&](double a) {
      double total = 0.0;
      for (double e : eta) total += stats::logistic(a + e);
      return total / static_cast<double>(eta.size()) - target;
    };
    const double lo = -(max_abs + 40.0);
    const double hi = max_abs + 40.0;
    const double f_lo = residual(lo);
    const double f_hi = residual(hi);
    if (f_lo > 0.0 || f_hi < 0.0)
      throw CalibrationError(fmt::format("{}: target {} unreachable with the given slopes",
                                         to_string(level), target));
    std::uintmax_t max_iter = 200;
    const auto bracket = boost::math::tools::toms748_solve(
        residual, lo, hi, f_lo, f_hi, boost::math::tools::eps_tolerance<double>(52), max_iter);
    const double a = 0.5 * (bracket.first + bracket.second);
    if (!(std::abs(residual(a)) < 1e-6))
      throw CalibrationError(fmt::format("{}: calibration residual {} exceeds 1e-6",
                                         to_string(level), residual(a)));
    out.intercepts[level] = a;
  }
  return out;
}

namespace {

std::vector<std::uint8_t> draw_responses(const Frame& frame, const ResponseModel& model,
                                         Level level, const std::vector<std::int64_t>& ids,
                                         std::uint64_t seed) {
  std::vector<std::uint8_t> out(ids.size(), 0);
  if (!model.intercepts.count(level)) return out;
  Rng rng(derive_seed(seed, "response", to_string(level)));
  for (std::size_t i = 0; i < ids.size(); ++i)
    out[i] = draw_bernoulli(rng, response_probability(frame, model, level, ids[i])) ? 1 : 0;
  return out;
}

LevelResponses level_responses(const Frame& frame, const ResponseModel& model, Level level,
                               const SampleDraw& draw, std::uint64_t seed) {
  LevelResponses out;
  out.unit_id = selected_units(draw, level);
  out.responded = draw_responses(frame, model, level, out.unit_id, seed);
  const auto k_out = static_cast<Eigen::Index>(frame.outcome_count());
  out.outcomes = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(out.unit_id.size()), k_out,
                                           std::numeric_limits<double>::quiet_NaN());
  for (std::size_t u = 0; u < out.unit_id.size(); ++u) {
    if (!out.responded[u]) continue;
    const auto& practices = level == Level::subsidiary
                                ? frame.practices_by_subsidiary[out.unit_id[u]]
                                : frame.practices_by_parent[out.unit_id[u]];
    if (practices.empty()) continue;
    for (Eigen::Index m = 0; m < k_out; ++m) {
      double s = 0.0;
      for (auto pid : practices) s += frame.practices[pid].true_outcomes[m];
      out.outcomes(static_cast<Eigen::Index>(u), m) = s / static_cast<double>(practices.size());
    }
  }
  return out;
}

}  // namespace

StudyDataset apply_missingness(const Frame& frame, const SampleDraw& draw,
                               const std::vector<ClaimsAggregate>& aggregates,
                               const ResponseModel& calibrated, std::uint64_t seed) {
  if (!calibrated.calibrated())
    throw CalibrationError("apply_missingness: response model is not calibrated");
  const auto ids = selected_units(draw, Level::practice);
  const auto practice_resp = draw_responses(frame, calibrated, Level::practice, ids, seed);
  std::vector<std::uint8_t> responded(frame.practices.size(), 0);
  for (std::size_t i = 0; i < ids.size(); ++i) responded[ids[i]] = practice_resp[i];
  auto data = build_dataset(frame, draw, aggregates, responded);
  data.subsidiaries = level_responses(frame, calibrated, Level::subsidiary, draw, seed);
  data.parents = level_responses(frame, calibrated, Level::parent, draw, seed);
  return data;
}

}  // namespace svyimp
