#include "svyimp/claims.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <unordered_map>

#include <fmt/format.h>

#include "svyimp/error.hpp"
#include "svyimp/json_util.hpp"
#include "svyimp/random.hpp"
#include "svyimp/stats.hpp"

namespace svyimp {

std::string_view to_string(Race race) {
  switch (race) {
    case Race::white: return "white";
    case Race::black: return "black";
    case Race::hispanic: return "hispanic";
    case Race::other: return "other";
  }
  return "other";
}

std::string_view to_string(Region region) {
  switch (region) {
    case Region::midwest: return "midwest";
    case Region::northeast: return "northeast";
    case Region::south: return "south";
    case Region::west: return "west";
  }
  return "midwest";
}

Race parse_race(std::string_view name) {
  for (auto r : {Race::white, Race::black, Race::hispanic, Race::other})
    if (to_string(r) == name) return r;
  throw FormatError("unknown race '" + std::string(name) + "'");
}

Region parse_region(std::string_view name) {
  for (auto r : {Region::midwest, Region::northeast, Region::south, Region::west})
    if (to_string(r) == name) return r;
  throw FormatError("unknown region '" + std::string(name) + "'");
}

void ClaimsConfig::validate() const {
  if (!(per_practice_mean > 0.0)) throw ConfigError("claims.per_practice_mean: must be > 0");
  if (!(std::abs(aux_outcome_corr) < 1.0))
    throw ConfigError("claims.aux_outcome_corr: must be in (-1, 1)");
  if (!(unlinked_practice_fraction >= 0.0 && unlinked_practice_fraction < 1.0))
    throw ConfigError("claims.unlinked_practice_fraction: must be in [0, 1)");
}

void to_json(nlohmann::json& j, const ClaimsConfig& c) {
  j = nlohmann::json{{"per_practice_mean", c.per_practice_mean},
                     {"aux_outcome_corr", c.aux_outcome_corr},
                     {"unlinked_practice_fraction", c.unlinked_practice_fraction}};
}

void from_json(const nlohmann::json& j, ClaimsConfig& c) {
  json_util::require_keys(j, "claims",
                          {"per_practice_mean", "aux_outcome_corr", "unlinked_practice_fraction"});
  json_util::get_to(j, "claims", "per_practice_mean", c.per_practice_mean);
  json_util::get_to(j, "claims", "aux_outcome_corr", c.aux_outcome_corr);
  json_util::get_to(j, "claims", "unlinked_practice_fraction", c.unlinked_practice_fraction);
}

Region practice_region(const Frame& frame, std::int64_t practice_id) {
  const auto parent = frame.parent_of_practice(practice_id);
  const auto h = parent ? derive_seed(frame.seed, "region", "parent", *parent)
                        : derive_seed(frame.seed, "region", "practice", practice_id);
  return static_cast<Region>(h % 4);
}

namespace {

std::string external_tin(std::int64_t value) { return fmt::format("9{:08d}", value % 100000000); }

/// Beneficiaries of one practice, drawn from the practice's own stream.
std::vector<Beneficiary> practice_beneficiaries(const Frame& frame, const ClaimsConfig& config,
                                                std::int64_t pid, double z_outcome, double r_lat,
                                                std::uint64_t seed) {
  Rng rng(derive_seed(seed, "practice", pid));
  const bool unlinked = draw_bernoulli(rng, config.unlinked_practice_fraction);
  const double t = r_lat * z_outcome + std::sqrt(1.0 - r_lat * r_lat) * draw_normal(rng);
  const double a_female = draw_normal(rng);
  const double a_income = draw_normal(rng);
  const double a_health = draw_normal(rng);
  const double a_black = draw_normal(rng);
  const double a_hispanic = draw_normal(rng);
  const double a_rural = draw_normal(rng);

  static constexpr std::array<double, 4> kRuralBase = {0.30, 0.15, 0.30, 0.20};
  const auto region = practice_region(frame, pid);
  const double p_rural =
      stats::logistic(stats::logit(kRuralBase[static_cast<int>(region)]) + 0.8 * a_rural);
  const std::array<double, 4> race_weight = {std::exp(1.8),
                                             std::exp(-0.2 + 0.7 * a_black - 0.1 * t),
                                             std::exp(-0.4 + 0.7 * a_hispanic), std::exp(-1.0)};
  const double race_total = race_weight[0] + race_weight[1] + race_weight[2] + race_weight[3];
  const double p_full_dual = stats::logistic(-2.2 - 0.2 * t - 0.3 * a_income);
  const double p_partial_dual = 0.05;

  const auto home_tin = unlinked ? external_tin(pid) : frame.practices[pid].tin;
  const auto n_practices = static_cast<std::int64_t>(frame.practices.size());
  const auto count = draw_poisson(rng, config.per_practice_mean);
  std::vector<Beneficiary> out;
  out.reserve(static_cast<std::size_t>(count));
  for (std::int64_t b = 0; b < count; ++b) {
    Beneficiary ben;
    ben.age = std::max(0.0, std::round(72.0 + 6.0 * t + 7.0 * draw_normal(rng)));
    ben.female = draw_bernoulli(rng, stats::logistic(0.2 + 0.2 * a_female)) ? 1 : 0;
    ben.income = std::round(
        std::exp(std::log(55000.0) + 0.08 * t + 0.25 * a_income + 0.3 * draw_normal(rng)));
    const double u = draw_uniform(rng) * race_total;
    double cum = 0.0;
    ben.race = Race::other;
    for (int r = 0; r < 4; ++r) {
      cum += race_weight[r];
      if (u < cum) {
        ben.race = static_cast<Race>(r);
        break;
      }
    }
    ben.rural = draw_bernoulli(rng, p_rural) ? 1 : 0;
    const double d = draw_uniform(rng);
    ben.full_dual = d < p_full_dual ? 1 : 0;
    ben.partial_dual = (!ben.full_dual && d < p_full_dual + p_partial_dual) ? 1 : 0;
    ben.hcc_count = draw_poisson(rng, std::exp(std::log(1.4) + 0.12 * t + 0.15 * a_health));
    ben.admissions = draw_poisson(rng, 0.3 * std::exp(0.15 * t));
    ben.depression = draw_bernoulli(rng, stats::logistic(-1.5 + 0.2 * t + 0.3 * a_health)) ? 1 : 0;
    ben.smi = draw_bernoulli(rng, stats::logistic(-3.0 + 0.15 * t + 0.2 * a_health)) ? 1 : 0;

    const auto home_visits = 3 + draw_poisson(rng, 4.0);
    ben.visit_tins.push_back({home_tin, home_visits});
    if (draw_bernoulli(rng, 0.6)) {
      const auto extra = 1 + draw_poisson(rng, 0.5);
      for (std::int64_t e = 0; e < extra; ++e) {
        std::string tin;
        if (!unlinked && n_practices > 1 && draw_bernoulli(rng, 0.7)) {
          auto other = static_cast<std::int64_t>(draw_uniform(rng) * (n_practices - 1));
          other = std::min(other, n_practices - 2);
          if (other >= pid) ++other;
          tin = frame.practices[other].tin;
        } else {
          tin = external_tin(static_cast<std::int64_t>(draw_uniform(rng) * 1e8));
        }
        const auto visits =
            1 + static_cast<std::int64_t>(draw_uniform(rng) * static_cast<double>(home_visits - 1));
        const bool duplicate = std::any_of(ben.visit_tins.begin(), ben.visit_tins.end(),
                                           [&](const VisitCount& v) { return v.tin == tin; });
        if (!duplicate) ben.visit_tins.push_back({tin, std::min(visits, home_visits - 1)});
      }
    }
    out.push_back(std::move(ben));
  }
  return out;
}

}  // namespace

std::vector<Beneficiary> generate_beneficiaries(const Frame& frame, const ClaimsConfig& config,
                                                std::uint64_t seed) {
  config.validate();
  if (frame.practices.empty()) throw InsufficientDataError("claims: frame has no practices");
  const auto n = static_cast<std::int64_t>(frame.practices.size());

  std::vector<double> y(frame.practices.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = frame.practices[i].true_outcomes.at(0);
  const double y_mean = stats::mean(y);
  double y_var = 0.0;
  for (double v : y) y_var += (v - y_mean) * (v - y_mean);
  const double y_sd = std::sqrt(y_var / static_cast<double>(y.size()));

  // Inflate the latent correlation so the practice mean of age, which carries
  // within-practice noise (sd 7 plus rounding) over ~per_practice_mean
  // beneficiaries, lands near the requested correlation.
  const double noise = (49.0 + 1.0 / 12.0) / (36.0 * config.per_practice_mean);
  const double r_lat = std::clamp(config.aux_outcome_corr * std::sqrt(1.0 + noise), -0.99, 0.99);

  std::vector<std::vector<Beneficiary>> per_practice(frame.practices.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::int64_t pid = 0; pid < n; ++pid) {
    const double z = y_sd > 0.0 ? (y[pid] - y_mean) / y_sd : 0.0;
    per_practice[pid] = practice_beneficiaries(frame, config, pid, z, r_lat, seed);
  }
  std::vector<Beneficiary> out;
  for (auto& group : per_practice) {
    for (auto& ben : group) {
      ben.id = static_cast<std::int64_t>(out.size());
      out.push_back(std::move(ben));
    }
  }
  return out;
}

std::vector<std::int64_t> attribute(const std::vector<Beneficiary>& beneficiaries,
                                    const Frame& frame) {
  std::unordered_map<std::string, std::int64_t> by_tin;
  by_tin.reserve(frame.practices.size());
  for (const auto& p : frame.practices) by_tin.emplace(p.tin, p.id);

  std::vector<std::int64_t> out(beneficiaries.size(), kUnattributed);
  for (std::size_t b = 0; b < beneficiaries.size(); ++b) {
    std::int64_t best_visits = 0;
    const std::string* best_tin = nullptr;
    for (const auto& v : beneficiaries[b].visit_tins) {
      if (v.visits <= 0) continue;
      const auto it = by_tin.find(v.tin);
      if (it == by_tin.end()) continue;
      if (best_tin == nullptr || v.visits > best_visits ||
          (v.visits == best_visits && v.tin < *best_tin)) {
        best_visits = v.visits;
        best_tin = &v.tin;
        out[b] = it->second;
      }
    }
  }
  return out;
}

const std::vector<std::string>& claims_aggregate_fields() {
  static const std::vector<std::string> fields = {
      "practice_size",  "pct_rural",        "pct_female",    "pct_white",
      "pct_black",      "pct_hispanic",     "pct_other",     "pct_partial_dual",
      "pct_full_dual",  "pct_depression",   "pct_smi",       "mean_age",
      "mean_income",    "mean_hcc",         "admissions_per_100", "system_size"};
  return fields;
}

double aggregate_field(const ClaimsAggregate& a, std::string_view name) {
  if (name == "practice_size") return static_cast<double>(a.practice_size);
  if (name == "pct_rural") return a.pct_rural;
  if (name == "pct_female") return a.pct_female;
  if (name == "pct_white") return a.pct_white;
  if (name == "pct_black") return a.pct_black;
  if (name == "pct_hispanic") return a.pct_hispanic;
  if (name == "pct_other") return a.pct_other;
  if (name == "pct_partial_dual") return a.pct_partial_dual;
  if (name == "pct_full_dual") return a.pct_full_dual;
  if (name == "pct_depression") return a.pct_depression;
  if (name == "pct_smi") return a.pct_smi;
  if (name == "mean_age") return a.mean_age;
  if (name == "mean_income") return a.mean_income;
  if (name == "mean_hcc") return a.mean_hcc;
  if (name == "admissions_per_100") return a.admissions_per_100;
  if (name == "system_size") return static_cast<double>(a.system_size);
  throw ConfigError("unknown claims field '" + std::string(name) + "'");
}

namespace {

// Every accumulated attribute is integer-valued, so the sums are exact and
// do not depend on beneficiary order.
struct Sums {
  std::int64_t n = 0;
  double rural = 0, female = 0, white = 0, black = 0, hispanic = 0, other = 0;
  double partial_dual = 0, full_dual = 0, depression = 0, smi = 0;
  double age = 0, income = 0, hcc = 0, admissions = 0;

  void add(const Beneficiary& b) {
    ++n;
    rural += b.rural;
    female += b.female;
    white += b.race == Race::white;
    black += b.race == Race::black;
    hispanic += b.race == Race::hispanic;
    other += b.race == Race::other;
    partial_dual += b.partial_dual;
    full_dual += b.full_dual;
    depression += b.depression;
    smi += b.smi;
    age += b.age;
    income += b.income;
    hcc += static_cast<double>(b.hcc_count);
    admissions += static_cast<double>(b.admissions);
  }
};

ClaimsAggregate finish(const Frame& frame, std::int64_t pid, const Sums& s) {
  ClaimsAggregate a;
  a.practice_id = pid;
  a.practice_size = s.n;
  a.region = practice_region(frame, pid);
  const auto parent = frame.parent_of_practice(pid);
  a.system_size = parent ? frame.parents[*parent].nach : 0;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double n = static_cast<double>(s.n);
  auto rate = [&](double total) { return s.n > 0 ? total / n : nan; };
  a.pct_rural = rate(s.rural);
  a.pct_female = rate(s.female);
  a.pct_white = rate(s.white);
  a.pct_black = rate(s.black);
  a.pct_hispanic = rate(s.hispanic);
  a.pct_other = rate(s.other);
  a.pct_partial_dual = rate(s.partial_dual);
  a.pct_full_dual = rate(s.full_dual);
  a.pct_depression = rate(s.depression);
  a.pct_smi = rate(s.smi);
  a.mean_age = rate(s.age);
  a.mean_income = rate(s.income);
  a.mean_hcc = rate(s.hcc);
  a.admissions_per_100 = s.n > 0 ? 100.0 * s.admissions / n : nan;
  return a;
}

}  // namespace

std::vector<ClaimsAggregate> aggregate(const std::vector<Beneficiary>& beneficiaries,
                                       const std::vector<std::int64_t>& attribution,
                                       const Frame& frame, Execution exec) {
  if (attribution.size() != beneficiaries.size())
    throw FormatError("aggregate: attribution length does not match beneficiaries");
  const auto n_practices = static_cast<std::int64_t>(frame.practices.size());
  for (auto a : attribution)
    if (a != kUnattributed && (a < 0 || a >= n_practices))
      throw FormatError(fmt::format("aggregate: attribution to unknown practice {}", a));

  std::vector<ClaimsAggregate> out(frame.practices.size());
  if (exec == Execution::serial) {
    std::vector<Sums> sums(frame.practices.size());
    for (std::size_t b = 0; b < beneficiaries.size(); ++b)
      if (attribution[b] != kUnattributed) sums[attribution[b]].add(beneficiaries[b]);
    for (std::int64_t pid = 0; pid < n_practices; ++pid) out[pid] = finish(frame, pid, sums[pid]);
    return out;
  }

  std::vector<std::int64_t> members;
  for (std::size_t b = 0; b < beneficiaries.size(); ++b) {
    if (attribution[b] == kUnattributed) continue;
    members.push_back(static_cast<std::int64_t>(b));
  }
  std::vector<std::int64_t> member_cluster(members.size());
  for (std::size_t k = 0; k < members.size(); ++k) member_cluster[k] = attribution[members[k]];
  const auto index = ClusterIndex::build(member_cluster, n_practices);
#pragma omp parallel for schedule(dynamic, 64)
  for (std::int64_t pid = 0; pid < n_practices; ++pid) {
    Sums s;
    for (auto k = index.offsets[pid]; k < index.offsets[pid + 1]; ++k)
      s.add(beneficiaries[members[index.rows[k]]]);
    out[pid] = finish(frame, pid, s);
  }
  return out;
}

}  // namespace svyimp
