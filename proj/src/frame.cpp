#include "svyimp/frame.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_set>

#include <fmt/format.h>

#include "svyimp/error.hpp"
#include "svyimp/json_util.hpp"
#include "svyimp/random.hpp"

namespace svyimp {

std::string_view to_string(Level level) {
  switch (level) {
    case Level::practice: return "practice";
    case Level::subsidiary: return "subsidiary";
    case Level::parent: return "parent";
  }
  return "practice";
}

Level parse_level(std::string_view name) {
  if (name == "practice") return Level::practice;
  if (name == "subsidiary") return Level::subsidiary;
  if (name == "parent") return Level::parent;
  throw ConfigError("unknown level '" + std::string(name) + "'");
}

void GeneratorConfig::validate() const {
  auto fail = [](const char* field, const std::string& why) {
    throw ConfigError(fmt::format("generator.{}: {}", field, why));
  };
  if (n_parents < 1) fail("n_parents", "must be >= 1");
  if (!std::isfinite(mean_subsidiaries_per_parent) || mean_subsidiaries_per_parent < 0.0)
    fail("mean_subsidiaries_per_parent", "must be a finite value >= 0");
  if (!std::isfinite(mean_practices_per_subsidiary) || mean_practices_per_subsidiary < 0.0)
    fail("mean_practices_per_subsidiary", "must be a finite value >= 0");
  if (n_independent_practices < 0) fail("n_independent_practices", "must be >= 0");
  if (outcome_count < 1) fail("outcome_count", "must be >= 1");
  if (!(cluster_icc >= 0.0 && cluster_icc < 1.0)) fail("cluster_icc", "must lie in [0, 1)");
  if (!(covariate_outcome_corr > -1.0 && covariate_outcome_corr < 1.0))
    fail("covariate_outcome_corr", "must lie in (-1, 1)");
  if (cluster_icc + covariate_outcome_corr * covariate_outcome_corr > 1.0)
    fail("cluster_icc", "cluster_icc + covariate_outcome_corr^2 must not exceed 1");
  if (!(outcome_sd > 0.0) || !std::isfinite(outcome_sd)) fail("outcome_sd", "must be > 0");
  if (!std::isfinite(outcome_mean)) fail("outcome_mean", "must be finite");
  if (!std::isfinite(binary_threshold)) fail("binary_threshold", "must be finite");
  for (auto k : binary_outcomes)
    if (k < 0 || k >= outcome_count) fail("binary_outcomes", "index out of range");
}

void to_json(nlohmann::json& j, const GeneratorConfig& c) {
  j = nlohmann::json{{"n_parents", c.n_parents},
                     {"mean_subsidiaries_per_parent", c.mean_subsidiaries_per_parent},
                     {"mean_practices_per_subsidiary", c.mean_practices_per_subsidiary},
                     {"n_independent_practices", c.n_independent_practices},
                     {"outcome_count", c.outcome_count},
                     {"cluster_icc", c.cluster_icc},
                     {"covariate_outcome_corr", c.covariate_outcome_corr},
                     {"binary_outcomes", c.binary_outcomes},
                     {"binary_threshold", c.binary_threshold},
                     {"outcome_mean", c.outcome_mean},
                     {"outcome_sd", c.outcome_sd}};
}

void from_json(const nlohmann::json& j, GeneratorConfig& c) {
  json_util::require_keys(j, "generator",
                          {"n_parents", "mean_subsidiaries_per_parent",
                           "mean_practices_per_subsidiary", "n_independent_practices",
                           "outcome_count", "cluster_icc", "covariate_outcome_corr",
                           "binary_outcomes", "binary_threshold", "outcome_mean", "outcome_sd"});
  json_util::get_to(j, "generator", "n_parents", c.n_parents);
  json_util::get_to(j, "generator", "mean_subsidiaries_per_parent",
                    c.mean_subsidiaries_per_parent);
  json_util::get_to(j, "generator", "mean_practices_per_subsidiary",
                    c.mean_practices_per_subsidiary);
  json_util::get_to(j, "generator", "n_independent_practices", c.n_independent_practices);
  json_util::get_to(j, "generator", "outcome_count", c.outcome_count);
  json_util::get_to(j, "generator", "cluster_icc", c.cluster_icc);
  json_util::get_to(j, "generator", "covariate_outcome_corr", c.covariate_outcome_corr);
  json_util::get_to(j, "generator", "binary_outcomes", c.binary_outcomes);
  json_util::get_to(j, "generator", "binary_threshold", c.binary_threshold);
  json_util::get_to(j, "generator", "outcome_mean", c.outcome_mean);
  json_util::get_to(j, "generator", "outcome_sd", c.outcome_sd);
}

void Frame::index() {
  practices_by_subsidiary.assign(subsidiaries.size(), {});
  subsidiaries_by_parent.assign(parents.size(), {});
  practices_by_parent.assign(parents.size(), {});
  for (const auto& s : subsidiaries) {
    if (s.parent_id < 0 || s.parent_id >= static_cast<std::int64_t>(parents.size()))
      throw FormatError(fmt::format("subsidiary {} references unknown parent {}", s.id,
                                    s.parent_id));
    subsidiaries_by_parent[s.parent_id].push_back(s.id);
  }
  for (const auto& p : practices) {
    if (!p.os_id) continue;
    if (*p.os_id < 0 || *p.os_id >= static_cast<std::int64_t>(subsidiaries.size()))
      throw FormatError(fmt::format("practice {} references unknown subsidiary {}", p.id,
                                    *p.os_id));
    practices_by_subsidiary[*p.os_id].push_back(p.id);
    practices_by_parent[subsidiaries[*p.os_id].parent_id].push_back(p.id);
  }
}

void Frame::validate() const {
  std::vector<std::int64_t> nos(parents.size(), 0);
  for (const auto& s : subsidiaries) {
    if (s.parent_id < 0 || s.parent_id >= static_cast<std::int64_t>(parents.size()))
      throw FormatError(fmt::format("subsidiary {} references unknown parent {}", s.id,
                                    s.parent_id));
    ++nos[s.parent_id];
  }
  for (std::size_t i = 0; i < parents.size(); ++i) {
    const auto& p = parents[i];
    if (p.id != static_cast<std::int64_t>(i)) throw FormatError("parent ids must be dense");
    if (p.nach < 0 || p.nmg < 0 || p.nos < 0)
      throw FormatError(fmt::format("parent {} has a negative count", p.id));
    if (!(p.pertot >= 0.0 && p.pertot <= 1.0))
      throw FormatError(fmt::format("parent {} pertot outside [0,1]", p.id));
    if (p.nos != nos[i])
      throw FormatError(fmt::format("parent {} nos does not match its subsidiaries", p.id));
  }
  for (std::size_t i = 0; i < subsidiaries.size(); ++i) {
    if (subsidiaries[i].id != static_cast<std::int64_t>(i))
      throw FormatError("subsidiary ids must be dense");
  }
  const std::size_t k = outcome_count();
  std::unordered_set<std::string> tins;
  for (std::size_t i = 0; i < practices.size(); ++i) {
    const auto& p = practices[i];
    if (p.id != static_cast<std::int64_t>(i)) throw FormatError("practice ids must be dense");
    if (p.os_id && (*p.os_id < 0 || *p.os_id >= static_cast<std::int64_t>(subsidiaries.size())))
      throw FormatError(fmt::format("practice {} references unknown subsidiary {}", p.id,
                                    *p.os_id));
    if (p.npcp > p.np) throw FormatError(fmt::format("practice {} has npcp > np", p.id));
    if (p.npcp < 3) throw FormatError(fmt::format("practice {} has npcp < 3", p.id));
    if (!tins.insert(p.tin).second)
      throw FormatError(fmt::format("duplicate tin {}", p.tin));
    if (p.true_outcomes.size() != k)
      throw FormatError(fmt::format("practice {} has {} outcomes, expected {}", p.id,
                                    p.true_outcomes.size(), k));
  }
}

std::optional<std::int64_t> Frame::parent_of_practice(std::int64_t practice_id) const {
  const auto& p = practices.at(practice_id);
  if (!p.os_id) return std::nullopt;
  return subsidiaries.at(*p.os_id).parent_id;
}

std::size_t Frame::outcome_count() const {
  return practices.empty() ? static_cast<std::size_t>(generation_config.outcome_count)
                           : practices.front().true_outcomes.size();
}

std::vector<std::int64_t> Frame::independent_practices() const {
  std::vector<std::int64_t> out;
  for (const auto& p : practices)
    if (p.independent()) out.push_back(p.id);
  return out;
}

namespace {

std::int64_t draw_cluster_size(Rng& rng, double mean) {
  if (mean >= 1.0) return 1 + draw_poisson(rng, mean - 1.0);
  return draw_poisson(rng, mean);
}

Practice make_practice(Rng& rng, std::int64_t id, std::optional<std::int64_t> os_id) {
  Practice p;
  p.id = id;
  p.os_id = os_id;
  std::lognormal_distribution<double> pcp(std::log(5.0), 0.5);
  std::int64_t npcp = 0;
  do {
    npcp = std::llround(pcp(rng));
  } while (npcp < 3);
  p.npcp = npcp;
  p.np = npcp + draw_poisson(rng, 0.6 * static_cast<double>(npcp));
  p.tin = fmt::format("{:09d}", 100000000 + id);
  return p;
}

}  // namespace

Frame generate_frame(const GeneratorConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  Frame frame;
  frame.generation_config = config;
  frame.seed = seed;

  for (std::int64_t i = 0; i < config.n_parents; ++i) {
    CorporateParent parent;
    parent.id = i;
    parent.nos = draw_cluster_size(rng, config.mean_subsidiaries_per_parent);
    parent.nach = draw_poisson(rng, 1.0 + 0.8 * static_cast<double>(parent.nos));
    parent.nmg = draw_poisson(rng, 0.5 + static_cast<double>(parent.nos));
    parent.pertot = draw_beta(rng, 2.0, 2.0);
    for (std::int64_t s = 0; s < parent.nos; ++s) {
      OwnerSubsidiary sub;
      sub.id = static_cast<std::int64_t>(frame.subsidiaries.size());
      sub.parent_id = parent.id;
      sub.latent_trait = draw_normal(rng);
      frame.subsidiaries.push_back(sub);
    }
    frame.parents.push_back(parent);
  }
  for (const auto& sub : frame.subsidiaries) {
    const auto m = draw_cluster_size(rng, config.mean_practices_per_subsidiary);
    for (std::int64_t k = 0; k < m; ++k) {
      frame.practices.push_back(
          make_practice(rng, static_cast<std::int64_t>(frame.practices.size()), sub.id));
    }
  }
  for (std::int64_t k = 0; k < config.n_independent_practices; ++k) {
    frame.practices.push_back(
        make_practice(rng, static_cast<std::int64_t>(frame.practices.size()), std::nullopt));
  }
  if (frame.practices.empty()) {
    throw ConfigError("generator: configuration produced a frame without practices");
  }

  // Outcome latent = rho * std(npcp) + sqrt(1 - rho^2) * (random-intercept part),
  // with the intercept share chosen so the subsidiary ICC equals cluster_icc.
  const auto n = frame.practices.size();
  double npcp_mean = 0.0;
  for (const auto& p : frame.practices) npcp_mean += static_cast<double>(p.npcp);
  npcp_mean /= static_cast<double>(n);
  double npcp_var = 0.0;
  for (const auto& p : frame.practices) {
    const double d = static_cast<double>(p.npcp) - npcp_mean;
    npcp_var += d * d;
  }
  npcp_var /= static_cast<double>(n);
  const double npcp_sd = std::sqrt(npcp_var);

  const double rho = config.covariate_outcome_corr;
  const double resid_share = 1.0 - rho * rho;
  const double inner_icc = resid_share > 0.0 ? config.cluster_icc / resid_share : 0.0;
  const auto k_out = static_cast<std::size_t>(config.outcome_count);

  // Cluster effects: outcome 0 uses the stored latent trait; further outcomes
  // get their own draws.
  std::vector<std::vector<double>> sub_effect(frame.subsidiaries.size(),
                                              std::vector<double>(k_out, 0.0));
  for (std::size_t s = 0; s < frame.subsidiaries.size(); ++s) {
    sub_effect[s][0] = frame.subsidiaries[s].latent_trait;
    for (std::size_t m = 1; m < k_out; ++m) sub_effect[s][m] = draw_normal(rng);
  }
  const std::set<std::int64_t> binary(config.binary_outcomes.begin(),
                                      config.binary_outcomes.end());
  for (auto& p : frame.practices) {
    const double z_npcp =
        npcp_sd > 0.0 ? (static_cast<double>(p.npcp) - npcp_mean) / npcp_sd : 0.0;
    p.true_outcomes.resize(k_out);
    for (std::size_t m = 0; m < k_out; ++m) {
      const double u = p.os_id ? sub_effect[*p.os_id][m] : draw_normal(rng);
      const double e = draw_normal(rng);
      const double latent =
          rho * z_npcp +
          std::sqrt(resid_share) * (std::sqrt(inner_icc) * u + std::sqrt(1.0 - inner_icc) * e);
      if (binary.count(static_cast<std::int64_t>(m))) {
        p.true_outcomes[m] = latent > config.binary_threshold ? 1.0 : 0.0;
      } else {
        p.true_outcomes[m] = config.outcome_mean + config.outcome_sd * latent;
      }
    }
  }
  frame.index();
  frame.validate();
  return frame;
}

double population_mean(const Frame& frame, std::size_t outcome_index, Level level) {
  if (outcome_index >= frame.outcome_count()) {
    throw ConfigError(fmt::format("outcome index {} out of range (outcome_count = {})",
                                  outcome_index, frame.outcome_count()));
  }
  auto unit_mean = [&](const std::vector<std::int64_t>& ids) {
    double s = 0.0;
    for (auto id : ids) s += frame.practices[id].true_outcomes[outcome_index];
    return s / static_cast<double>(ids.size());
  };
  double total = 0.0;
  std::size_t count = 0;
  switch (level) {
    case Level::practice:
      for (const auto& p : frame.practices) total += p.true_outcomes[outcome_index];
      count = frame.practices.size();
      break;
    case Level::subsidiary:
      for (const auto& ids : frame.practices_by_subsidiary) {
        if (ids.empty()) continue;
        total += unit_mean(ids);
        ++count;
      }
      break;
    case Level::parent:
      for (const auto& ids : frame.practices_by_parent) {
        if (ids.empty()) continue;
        total += unit_mean(ids);
        ++count;
      }
      break;
  }
  if (count == 0) throw InsufficientDataError("no units with practices at requested level");
  return total / static_cast<double>(count);
}

namespace {

double system_covariate(const CorporateParent* parent, std::string_view name) {
  if (name == "nach") return parent ? static_cast<double>(parent->nach) : 0.0;
  if (name == "nmg") return parent ? static_cast<double>(parent->nmg) : 0.0;
  if (name == "nos") return parent ? static_cast<double>(parent->nos) : 0.0;
  if (name == "pertot") return parent ? parent->pertot : 1.0;
  throw ConfigError("unknown covariate '" + std::string(name) + "'");
}

bool is_system_covariate(std::string_view name) {
  return name == "nach" || name == "nmg" || name == "nos" || name == "pertot";
}

double sum_over(const Frame& frame, const std::vector<std::int64_t>& ids, std::string_view name) {
  if (name == "n_practices") return static_cast<double>(ids.size());
  double s = 0.0;
  for (auto id : ids) {
    const auto& p = frame.practices[id];
    s += static_cast<double>(name == "np" ? p.np : p.npcp);
  }
  return s;
}

}  // namespace

double frame_covariate(const Frame& frame, std::int64_t practice_id, std::string_view name) {
  const auto& p = frame.practices.at(practice_id);
  if (name == "np") return static_cast<double>(p.np);
  if (name == "npcp") return static_cast<double>(p.npcp);
  const auto parent = frame.parent_of_practice(practice_id);
  return system_covariate(parent ? &frame.parents[*parent] : nullptr, name);
}

double unit_covariate(const Frame& frame, Level level, std::int64_t unit_id,
                      std::string_view name) {
  const bool summed = name == "np" || name == "npcp" || name == "n_practices";
  if (!summed && !is_system_covariate(name)) {
    throw ConfigError("unknown covariate '" + std::string(name) + "'");
  }
  switch (level) {
    case Level::practice:
      if (name == "n_practices") return 1.0;
      return frame_covariate(frame, unit_id, name);
    case Level::subsidiary: {
      const auto& sub = frame.subsidiaries.at(unit_id);
      if (summed) return sum_over(frame, frame.practices_by_subsidiary.at(unit_id), name);
      return system_covariate(&frame.parents.at(sub.parent_id), name);
    }
    case Level::parent:
      if (summed) return sum_over(frame, frame.practices_by_parent.at(unit_id), name);
      return system_covariate(&frame.parents.at(unit_id), name);
  }
  return 0.0;
}

}  // namespace svyimp
