#include "svyimp/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "svyimp/error.hpp"
#include "svyimp/json_util.hpp"
#include "svyimp/random.hpp"

namespace svyimp {

std::string_view to_string(StageMethod method) {
  switch (method) {
    case StageMethod::srswor: return "srswor";
    case StageMethod::pps: return "pps";
    case StageMethod::external: return "external";
  }
  return "srswor";
}

std::string_view to_string(DesignKind kind) {
  switch (kind) {
    case DesignKind::three_level: return "three_level";
    case DesignKind::two_level: return "two_level";
    case DesignKind::single_level: return "single_level";
  }
  return "three_level";
}

DesignKind parse_design_kind(std::string_view name) {
  if (name == "three_level") return DesignKind::three_level;
  if (name == "two_level") return DesignKind::two_level;
  if (name == "single_level") return DesignKind::single_level;
  throw ConfigError("design.design: unknown design '" + std::string(name) + "'");
}

void StageProbabilitySpec::validate(std::string_view where) const {
  if (method != StageMethod::external && sample_size < 1)
    throw ConfigError(fmt::format("{}.sample_size: must be >= 1", where));
  if (method == StageMethod::pps && (!size_measure || size_measure->empty()))
    throw ConfigError(fmt::format("{}.size_measure: required for pps", where));
  if (method == StageMethod::external) {
    if (external_probabilities.empty())
      throw ConfigError(fmt::format("{}.probabilities: required for external", where));
    for (const auto& [id, p] : external_probabilities)
      if (!(p > 0.0 && p <= 1.0))
        throw ConfigError(fmt::format("{}.probabilities: unit {} has probability outside (0,1]",
                                      where, id));
  }
}

std::size_t DesignSpec::stage_count() const {
  switch (design) {
    case DesignKind::three_level: return 3;
    case DesignKind::two_level: return 2;
    case DesignKind::single_level: return 1;
  }
  return 1;
}

Level DesignSpec::first_stage_level() const {
  switch (design) {
    case DesignKind::three_level: return Level::parent;
    case DesignKind::two_level: return Level::subsidiary;
    case DesignKind::single_level: return Level::practice;
  }
  return Level::practice;
}

void DesignSpec::validate() const {
  if (stage_specs.size() != stage_count())
    throw ConfigError(fmt::format("design.stages: {} design needs {} stage specs, got {}",
                                  to_string(design), stage_count(), stage_specs.size()));
  for (std::size_t i = 0; i < stage_specs.size(); ++i)
    stage_specs[i].validate(fmt::format("design.stages[{}]", i));
  if (independent_stage) independent_stage->validate("design.independent_stage");
}

void to_json(nlohmann::json& j, const StageProbabilitySpec& s) {
  j = nlohmann::json{{"method", std::string(to_string(s.method))},
                     {"sample_size", s.sample_size},
                     {"take_all_if_smaller", s.take_all_if_smaller}};
  if (s.size_measure) j["size_measure"] = *s.size_measure;
  if (!s.external_probabilities.empty()) {
    nlohmann::json probs = nlohmann::json::object();
    for (const auto& [id, p] : s.external_probabilities) probs[std::to_string(id)] = p;
    j["probabilities"] = probs;
  }
}

void from_json(const nlohmann::json& j, StageProbabilitySpec& s) {
  json_util::require_keys(
      j, "stage", {"method", "sample_size", "size_measure", "take_all_if_smaller", "probabilities"});
  std::string method = "srswor";
  json_util::get_to(j, "stage", "method", method);
  if (method == "srswor") {
    s.method = StageMethod::srswor;
  } else if (method == "pps") {
    s.method = StageMethod::pps;
  } else if (method == "external") {
    s.method = StageMethod::external;
  } else {
    throw ConfigError("stage.method: unknown method '" + method + "'");
  }
  json_util::get_to(j, "stage", "sample_size", s.sample_size);
  if (j.contains("size_measure")) {
    std::string m;
    json_util::get_to(j, "stage", "size_measure", m);
    s.size_measure = m;
  }
  json_util::get_to(j, "stage", "take_all_if_smaller", s.take_all_if_smaller);
  if (j.contains("probabilities")) {
    const auto& probs = j.at("probabilities");
    if (!probs.is_object()) throw ConfigError("stage.probabilities: expected an object");
    for (const auto& item : probs.items()) {
      try {
        s.external_probabilities[std::stoll(item.key())] = item.value().get<double>();
      } catch (const std::exception& e) {
        throw ConfigError("stage.probabilities: bad entry '" + item.key() + "'");
      }
    }
  }
}

void to_json(nlohmann::json& j, const DesignSpec& d) {
  j = nlohmann::json{{"design", std::string(to_string(d.design))}, {"stages", d.stage_specs}};
  if (d.strata_by) j["strata_by"] = *d.strata_by;
  if (d.independent_stage) j["independent_stage"] = *d.independent_stage;
}

void from_json(const nlohmann::json& j, DesignSpec& d) {
  json_util::require_keys(j, "design", {"design", "stages", "strata_by", "independent_stage"});
  std::string kind = "three_level";
  json_util::get_to(j, "design", "design", kind);
  d.design = parse_design_kind(kind);
  if (!j.contains("stages")) throw ConfigError("design.stages: required");
  d.stage_specs = j.at("stages").get<std::vector<StageProbabilitySpec>>();
  if (j.contains("strata_by")) {
    std::string s;
    json_util::get_to(j, "design", "strata_by", s);
    d.strata_by = s;
  }
  if (j.contains("independent_stage"))
    d.independent_stage = j.at("independent_stage").get<StageProbabilitySpec>();
}

std::vector<double> pps_inclusion_probabilities(std::span<const double> sizes, std::int64_t n) {
  const auto count = static_cast<std::int64_t>(sizes.size());
  if (n > count) throw DesignError(fmt::format("pps: cannot draw {} of {} units", n, count));
  std::vector<double> pi(sizes.size(), 0.0);
  std::vector<bool> certain(sizes.size(), false);
  std::int64_t n_certain = 0;
  while (true) {
    double rest = 0.0;
    for (std::size_t i = 0; i < sizes.size(); ++i)
      if (!certain[i]) rest += sizes[i];
    const double remaining = static_cast<double>(n - n_certain);
    bool changed = false;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      if (certain[i]) {
        pi[i] = 1.0;
        continue;
      }
      pi[i] = rest > 0.0 ? remaining * sizes[i] / rest : 0.0;
      if (pi[i] >= 1.0) {
        certain[i] = true;
        ++n_certain;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return pi;
}

namespace {

std::vector<double> group_probabilities(const Frame& frame, Level level,
                                        std::span<const std::int64_t> units,
                                        const StageProbabilitySpec& spec, std::string_view where) {
  const auto n_units = static_cast<std::int64_t>(units.size());
  std::vector<double> pi(units.size(), 1.0);
  if (units.empty()) return pi;
  if (spec.method == StageMethod::external) {
    for (std::size_t i = 0; i < units.size(); ++i) {
      const auto it = spec.external_probabilities.find(units[i]);
      if (it == spec.external_probabilities.end())
        throw DesignError(fmt::format("{}: no external probability for {} {}", where,
                                      to_string(level), units[i]));
      pi[i] = it->second;
    }
    return pi;
  }
  if (spec.sample_size > n_units) {
    if (spec.take_all_if_smaller) return pi;
    throw DesignError(fmt::format("{}: group of {} {} units is smaller than sample size {}", where,
                                  n_units, to_string(level), spec.sample_size));
  }
  if (spec.method == StageMethod::srswor) {
    const double p = static_cast<double>(spec.sample_size) / static_cast<double>(n_units);
    std::fill(pi.begin(), pi.end(), p);
    return pi;
  }
  std::vector<double> sizes(units.size());
  for (std::size_t i = 0; i < units.size(); ++i) {
    sizes[i] = unit_covariate(frame, level, units[i], *spec.size_measure);
    if (!(sizes[i] > 0.0))
      throw DesignError(fmt::format("{}: size measure {} is not strictly positive for {} {}",
                                    where, *spec.size_measure, to_string(level), units[i]));
  }
  return pps_inclusion_probabilities(sizes, spec.sample_size);
}

std::vector<std::int64_t> iota_ids(std::size_t n) {
  std::vector<std::int64_t> ids(n);
  std::iota(ids.begin(), ids.end(), std::int64_t{0});
  return ids;
}

std::vector<std::int64_t> first_stage_units(const Frame& frame, const DesignSpec& spec) {
  switch (spec.design) {
    case DesignKind::three_level: return iota_ids(frame.parents.size());
    case DesignKind::two_level: return iota_ids(frame.subsidiaries.size());
    case DesignKind::single_level: return iota_ids(frame.practices.size());
  }
  return {};
}

/// Tercile strata by rank of (value, id).
std::vector<int> stratify(const Frame& frame, Level level, const std::vector<std::int64_t>& units,
                          const std::optional<std::string>& strata_by, int& n_strata) {
  std::vector<int> stratum(units.size(), 0);
  if (!strata_by) {
    n_strata = 1;
    return stratum;
  }
  n_strata = 3;
  std::vector<std::pair<double, std::int64_t>> keyed;
  keyed.reserve(units.size());
  for (auto id : units) keyed.emplace_back(unit_covariate(frame, level, id, *strata_by), id);
  std::sort(keyed.begin(), keyed.end());
  const auto n = keyed.size();
  for (std::size_t r = 0; r < n; ++r) {
    stratum[keyed[r].second] = static_cast<int>((3 * r) / n);
  }
  return stratum;
}

}  // namespace

StageProbabilities compute_stage_probabilities(const Frame& frame, const DesignSpec& spec) {
  spec.validate();
  StageProbabilities out;
  out.design = spec.design;
  out.first_level = spec.first_stage_level();
  const auto units = first_stage_units(frame, spec);
  out.first_stratum = stratify(frame, out.first_level, units, spec.strata_by, out.n_strata);
  out.first.assign(units.size(), 0.0);
  for (int h = 0; h < out.n_strata; ++h) {
    std::vector<std::int64_t> members;
    for (auto id : units)
      if (out.first_stratum[id] == h) members.push_back(id);
    const auto pi = group_probabilities(frame, out.first_level, members, spec.stage_specs[0],
                                        fmt::format("stage 1 stratum {}", h));
    for (std::size_t i = 0; i < members.size(); ++i) out.first[members[i]] = pi[i];
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (spec.design == DesignKind::three_level) {
    out.second.assign(frame.subsidiaries.size(), nan);
    for (std::size_t p = 0; p < frame.parents.size(); ++p) {
      const auto& subs = frame.subsidiaries_by_parent[p];
      const auto pi = group_probabilities(frame, Level::subsidiary, subs, spec.stage_specs[1],
                                          fmt::format("stage 2 parent {}", p));
      for (std::size_t i = 0; i < subs.size(); ++i) out.second[subs[i]] = pi[i];
    }
    out.third.assign(frame.practices.size(), nan);
    for (std::size_t s = 0; s < frame.subsidiaries.size(); ++s) {
      const auto& prs = frame.practices_by_subsidiary[s];
      const auto pi = group_probabilities(frame, Level::practice, prs, spec.stage_specs[2],
                                          fmt::format("stage 3 subsidiary {}", s));
      for (std::size_t i = 0; i < prs.size(); ++i) out.third[prs[i]] = pi[i];
    }
  } else if (spec.design == DesignKind::two_level) {
    out.second.assign(frame.practices.size(), nan);
    for (std::size_t s = 0; s < frame.subsidiaries.size(); ++s) {
      const auto& prs = frame.practices_by_subsidiary[s];
      const auto pi = group_probabilities(frame, Level::practice, prs, spec.stage_specs[1],
                                          fmt::format("stage 2 subsidiary {}", s));
      for (std::size_t i = 0; i < prs.size(); ++i) out.second[prs[i]] = pi[i];
    }
  }

  if (spec.design != DesignKind::single_level) {
    const auto independents = frame.independent_practices();
    if (!independents.empty()) {
      if (!spec.independent_stage)
        throw DesignError(
            "frame has independent practices but the design has no independent_stage");
      out.independent.assign(frame.practices.size(), nan);
      out.independent_stratum = out.n_strata;
      const auto pi = group_probabilities(frame, Level::practice, independents,
                                          *spec.independent_stage, "independent stage");
      for (std::size_t i = 0; i < independents.size(); ++i) out.independent[independents[i]] = pi[i];
    }
  }
  return out;
}

const SelectedPractice* SampleDraw::find(std::int64_t practice_id) const {
  const auto it = std::lower_bound(
      units.begin(), units.end(), practice_id,
      [](const SelectedPractice& u, std::int64_t id) { return u.practice_id < id; });
  if (it == units.end() || it->practice_id != practice_id) return nullptr;
  return &*it;
}

namespace {

/// Selects from `ids` with inclusion probabilities `pi`: simple random
/// sampling for SRSWOR, randomized systematic selection otherwise.
std::vector<std::int64_t> select_units(Rng& rng, const std::vector<std::int64_t>& ids,
                                       const std::vector<double>& pi,
                                       const StageProbabilitySpec& spec) {
  std::vector<std::int64_t> out;
  if (ids.empty()) return out;
  const bool take_all =
      std::all_of(pi.begin(), pi.end(), [](double p) { return p >= 1.0; });
  if (take_all) return ids;
  if (spec.method == StageMethod::srswor) {
    std::sample(ids.begin(), ids.end(), std::back_inserter(out), spec.sample_size, rng);
    return out;
  }
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  const double u = draw_uniform(rng);
  double cum = 0.0;
  for (auto k : order) {
    const double lo = cum;
    cum += pi[k];
    if (std::floor(cum - u) - std::floor(lo - u) > 0.0) out.push_back(ids[k]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

SampleDraw draw_sample(const Frame& frame, const DesignSpec& spec, std::uint64_t seed) {
  const auto probs = compute_stage_probabilities(frame, spec);
  Rng rng(seed);
  SampleDraw draw;
  draw.design = spec.design;

  const auto n_first = probs.first.size();
  std::vector<std::int64_t> first_selected;
  for (int h = 0; h < probs.n_strata; ++h) {
    std::vector<std::int64_t> members;
    std::vector<double> pi;
    for (std::size_t id = 0; id < n_first; ++id) {
      if (probs.first_stratum[id] != h) continue;
      members.push_back(static_cast<std::int64_t>(id));
      pi.push_back(probs.first[id]);
    }
    const auto chosen = select_units(rng, members, pi, spec.stage_specs[0]);
    first_selected.insert(first_selected.end(), chosen.begin(), chosen.end());
  }
  std::sort(first_selected.begin(), first_selected.end());

  auto add = [&](std::int64_t practice, std::int64_t psu, int stratum, double p1, double p2,
                 double p3) {
    SelectedPractice u;
    u.practice_id = practice;
    u.psu = psu;
    u.stratum = stratum;
    u.pi1 = p1;
    u.pi2 = p2;
    u.pi3 = p3;
    u.pi_final = p1 * p2 * p3;
    u.weight = 1.0 / u.pi_final;
    draw.units.push_back(u);
  };

  auto cluster_pi = [](const std::vector<std::int64_t>& ids, const std::vector<double>& table) {
    std::vector<double> pi;
    pi.reserve(ids.size());
    for (auto id : ids) pi.push_back(table[id]);
    return pi;
  };

  switch (spec.design) {
    case DesignKind::three_level:
      for (auto parent : first_selected) {
        draw.parents.push_back(
            {parent, probs.first_stratum[parent], parent, probs.first[parent]});
        const auto& subs = frame.subsidiaries_by_parent[parent];
        const auto chosen_subs =
            select_units(rng, subs, cluster_pi(subs, probs.second), spec.stage_specs[1]);
        for (auto sub : chosen_subs) {
          draw.subsidiaries.push_back({sub, probs.first_stratum[parent], parent,
                                       probs.first[parent] * probs.second[sub]});
          const auto& prs = frame.practices_by_subsidiary[sub];
          const auto chosen =
              select_units(rng, prs, cluster_pi(prs, probs.third), spec.stage_specs[2]);
          for (auto pr : chosen)
            add(pr, parent, probs.first_stratum[parent], probs.first[parent], probs.second[sub],
                probs.third[pr]);
        }
      }
      break;
    case DesignKind::two_level:
      for (auto sub : first_selected) {
        draw.subsidiaries.push_back({sub, probs.first_stratum[sub], sub, probs.first[sub]});
        const auto& prs = frame.practices_by_subsidiary[sub];
        const auto chosen =
            select_units(rng, prs, cluster_pi(prs, probs.second), spec.stage_specs[1]);
        for (auto pr : chosen)
          add(pr, sub, probs.first_stratum[sub], probs.first[sub], probs.second[pr], 1.0);
      }
      break;
    case DesignKind::single_level:
      for (auto pr : first_selected)
        add(pr, pr, probs.first_stratum[pr], probs.first[pr], 1.0, 1.0);
      break;
  }

  if (!probs.independent.empty()) {
    const auto independents = frame.independent_practices();
    const auto chosen = select_units(rng, independents, cluster_pi(independents, probs.independent),
                                     *spec.independent_stage);
    for (auto pr : chosen) add(pr, pr, probs.independent_stratum, probs.independent[pr], 1.0, 1.0);
  }
  std::sort(draw.units.begin(), draw.units.end(),
            [](const SelectedPractice& a, const SelectedPractice& b) {
              return a.practice_id < b.practice_id;
            });
  std::sort(draw.subsidiaries.begin(), draw.subsidiaries.end(),
            [](const SelectedUnit& a, const SelectedUnit& b) { return a.id < b.id; });
  return draw;
}

}  // namespace svyimp
