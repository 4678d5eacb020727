#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "support.hpp"
#include "svyimp/claims.hpp"
#include "svyimp/error.hpp"
#include "svyimp/random.hpp"
#include "svyimp/stats.hpp"

using namespace svyimp;
using svyimp::testing::toy_frame;

namespace {

Beneficiary with_visits(std::vector<VisitCount> visits) {
  Beneficiary b;
  b.age = 70;
  b.visit_tins = std::move(visits);
  return b;
}

double age_outcome_correlation(double aux_corr) {
  GeneratorConfig g;
  g.n_parents = 300;
  g.n_independent_practices = 800;
  const auto f = generate_frame(g, 12);
  ClaimsConfig c;
  c.aux_outcome_corr = aux_corr;
  const auto bens = generate_beneficiaries(f, c, 34);
  const auto agg = aggregate(bens, attribute(bens, f), f);
  std::vector<double> age, y;
  for (const auto& a : agg) {
    if (a.practice_size == 0) continue;
    age.push_back(a.mean_age);
    y.push_back(f.practices[a.practice_id].true_outcomes[0]);
  }
  REQUIRE(age.size() >= 2000);
  return *stats::pearson(age, y);
}

void check_same(const ClaimsAggregate& a, const ClaimsAggregate& b) {
  CHECK(a.practice_id == b.practice_id);
  CHECK(a.practice_size == b.practice_size);
  CHECK(a.region == b.region);
  CHECK(a.system_size == b.system_size);
  for (const auto& f : claims_aggregate_fields()) {
    const double x = aggregate_field(a, f), y = aggregate_field(b, f);
    if (std::isnan(x)) {
      CHECK(std::isnan(y));
    } else {
      CHECK(x == y);
    }
  }
}

}  // namespace

TEST_CASE("strict plurality") {
  const auto f = toy_frame(0, 0, 0, 2);
  const std::vector<Beneficiary> bens = {
      with_visits({{f.practices[1].tin, 2}, {f.practices[0].tin, 5}})};
  CHECK(attribute(bens, f) == std::vector<std::int64_t>{0});
}

TEST_CASE("ties go to the smaller tin") {
  const auto f = toy_frame(0, 0, 0, 2);
  const std::vector<Beneficiary> bens = {
      with_visits({{f.practices[1].tin, 3}, {f.practices[0].tin, 3}})};
  REQUIRE(f.practices[0].tin < f.practices[1].tin);
  CHECK(attribute(bens, f) == std::vector<std::int64_t>{0});
}

TEST_CASE("external tins are ignored and all-external beneficiaries are unattributed") {
  const auto f = toy_frame(0, 0, 0, 2);
  const std::vector<Beneficiary> bens = {
      with_visits({{"999999999", 9}, {f.practices[1].tin, 1}}),
      with_visits({{"999999998", 4}})};
  const auto a = attribute(bens, f);
  CHECK(a[0] == 1);
  CHECK(a[1] == kUnattributed);
}

TEST_CASE("attribution matches a brute-force argmax") {
  const auto f = toy_frame(0, 0, 0, 3);
  Rng rng(5);
  std::vector<Beneficiary> bens;
  for (int i = 0; i < 2000; ++i) {
    std::vector<VisitCount> v;
    for (int p = 0; p < 3; ++p)
      if (draw_uniform(rng) < 0.7) v.push_back({f.practices[p].tin, 1 + draw_poisson(rng, 2.0)});
    if (v.empty()) v.push_back({"900000001", 1});
    std::shuffle(v.begin(), v.end(), rng);
    bens.push_back(with_visits(v));
  }
  const auto got = attribute(bens, f);
  for (std::size_t i = 0; i < bens.size(); ++i) {
    std::int64_t best = kUnattributed, best_visits = -1;
    for (int p = 0; p < 3; ++p) {
      for (const auto& v : bens[i].visit_tins) {
        if (v.tin != f.practices[p].tin) continue;
        // Practices are scanned in tin order, so strict > keeps the smaller tin on ties.
        if (v.visits > best_visits) {
          best_visits = v.visits;
          best = p;
        }
      }
    }
    CHECK(got[i] == best);
  }
}

TEST_CASE("single-practice frame attributes everyone to it") {
  const auto f = toy_frame(0, 0, 0, 1);
  ClaimsConfig c;
  c.unlinked_practice_fraction = 0.0;
  const auto bens = generate_beneficiaries(f, c, 3);
  REQUIRE_FALSE(bens.empty());
  for (auto a : attribute(bens, f)) CHECK(a == 0);
}

TEST_CASE("generated beneficiaries satisfy their invariants") {
  GeneratorConfig g;
  g.n_parents = 30;
  g.n_independent_practices = 40;
  const auto f = generate_frame(g, 6);
  const auto bens = generate_beneficiaries(f, ClaimsConfig{}, 7);
  for (std::size_t i = 0; i < bens.size(); ++i) {
    const auto& b = bens[i];
    CHECK(b.id == static_cast<std::int64_t>(i));
    CHECK(b.age >= 0.0);
    CHECK(b.partial_dual + b.full_dual <= 1);
    CHECK_FALSE(b.visit_tins.empty());
  }
  CHECK(generate_beneficiaries(f, ClaimsConfig{}, 7).size() == bens.size());
}

TEST_CASE("generation errors") {
  Frame empty;
  CHECK_THROWS_AS(generate_beneficiaries(empty, ClaimsConfig{}, 1), InsufficientDataError);
  ClaimsConfig bad;
  bad.per_practice_mean = 0.0;
  CHECK_THROWS_AS(generate_beneficiaries(toy_frame(0, 0, 0, 1), bad, 1), ConfigError);
}

TEST_CASE("aux_outcome_corr controls the post-aggregation correlation") {
  CHECK(std::abs(age_outcome_correlation(0.0)) <= 0.05);
  const double r = age_outcome_correlation(0.6);
  CHECK(r >= 0.5);
  CHECK(r <= 0.7);
}

TEST_CASE("aggregate examples") {
  const auto f = toy_frame(0, 0, 0, 1);
  std::vector<Beneficiary> bens = {with_visits({{f.practices[0].tin, 3}}),
                                   with_visits({{f.practices[0].tin, 3}})};
  bens[0].age = 60;
  bens[1].age = 70;
  bens[0].female = bens[1].female = 1;
  const auto agg = aggregate(bens, attribute(bens, f), f);
  REQUIRE(agg.size() == 1);
  CHECK(agg[0].practice_size == 2);
  CHECK(agg[0].mean_age == 65.0);
  CHECK(agg[0].pct_female == 1.0);
  CHECK(agg[0].system_size == 0);
}

TEST_CASE("zero-attribution practices have missing rates") {
  const auto f = toy_frame(0, 0, 0, 2);
  const std::vector<Beneficiary> bens = {with_visits({{f.practices[0].tin, 3}})};
  const auto agg = aggregate(bens, attribute(bens, f), f);
  CHECK(agg[1].practice_size == 0);
  CHECK(std::isnan(agg[1].mean_age));
  CHECK(std::isnan(agg[1].pct_white));
}

TEST_CASE("aggregates match a groupwise recomputation") {
  GeneratorConfig g;
  g.n_parents = 40;
  g.n_independent_practices = 60;
  const auto f = generate_frame(g, 21);
  const auto bens = generate_beneficiaries(f, ClaimsConfig{}, 22);
  const auto attribution = attribute(bens, f);
  const auto agg = aggregate(bens, attribution, f, Execution::serial);

  struct Acc {
    double n = 0, age = 0, income = 0, hcc = 0, adm = 0, female = 0, rural = 0, white = 0,
           black = 0, hispanic = 0, other = 0, pd = 0, fd = 0, dep = 0, smi = 0;
  };
  std::map<std::int64_t, Acc> acc;
  for (std::size_t i = 0; i < bens.size(); ++i) {
    if (attribution[i] == kUnattributed) continue;
    auto& a = acc[attribution[i]];
    const auto& b = bens[i];
    a.n += 1;
    a.age += b.age;
    a.income += b.income;
    a.hcc += static_cast<double>(b.hcc_count);
    a.adm += static_cast<double>(b.admissions);
    a.female += b.female;
    a.rural += b.rural;
    a.white += b.race == Race::white;
    a.black += b.race == Race::black;
    a.hispanic += b.race == Race::hispanic;
    a.other += b.race == Race::other;
    a.pd += b.partial_dual;
    a.fd += b.full_dual;
    a.dep += b.depression;
    a.smi += b.smi;
  }
  for (const auto& a : agg) {
    const auto it = acc.find(a.practice_id);
    if (it == acc.end()) {
      CHECK(a.practice_size == 0);
      continue;
    }
    const auto& r = it->second;
    CHECK(a.practice_size == static_cast<std::int64_t>(r.n));
    CHECK(a.mean_age == doctest::Approx(r.age / r.n).epsilon(1e-12));
    CHECK(a.mean_income == doctest::Approx(r.income / r.n).epsilon(1e-12));
    CHECK(a.mean_hcc == doctest::Approx(r.hcc / r.n).epsilon(1e-12));
    CHECK(a.admissions_per_100 == doctest::Approx(100.0 * r.adm / r.n).epsilon(1e-12));
    CHECK(a.pct_female == doctest::Approx(r.female / r.n).epsilon(1e-12));
    CHECK(a.pct_rural == doctest::Approx(r.rural / r.n).epsilon(1e-12));
    CHECK(a.pct_partial_dual == doctest::Approx(r.pd / r.n).epsilon(1e-12));
    CHECK(a.pct_full_dual == doctest::Approx(r.fd / r.n).epsilon(1e-12));
    CHECK(a.pct_depression == doctest::Approx(r.dep / r.n).epsilon(1e-12));
    CHECK(a.pct_smi == doctest::Approx(r.smi / r.n).epsilon(1e-12));
    CHECK(a.pct_black == doctest::Approx(r.black / r.n).epsilon(1e-12));
    CHECK(std::abs(a.pct_white + a.pct_black + a.pct_hispanic + a.pct_other - 1.0) <= 1e-9);
    for (const auto& field : claims_aggregate_fields()) {
      if (field.rfind("pct_", 0) != 0) continue;
      CHECK(aggregate_field(a, field) >= 0.0);
      CHECK(aggregate_field(a, field) <= 1.0);
    }
    const auto parent = f.parent_of_practice(a.practice_id);
    CHECK(a.system_size == (parent ? f.parents[*parent].nach : 0));
    CHECK(a.region == practice_region(f, a.practice_id));
  }
}

TEST_CASE("aggregation is permutation invariant and parallel matches serial") {
  GeneratorConfig g;
  g.n_parents = 40;
  g.n_independent_practices = 60;
  const auto f = generate_frame(g, 23);
  auto bens = generate_beneficiaries(f, ClaimsConfig{}, 24);
  auto attribution = attribute(bens, f);
  const auto serial = aggregate(bens, attribution, f, Execution::serial);
  const auto parallel = aggregate(bens, attribution, f, Execution::parallel);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) check_same(serial[i], parallel[i]);

  std::vector<std::size_t> order(bens.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(1);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Beneficiary> shuffled;
  std::vector<std::int64_t> shuffled_attr;
  for (auto i : order) {
    shuffled.push_back(bens[i]);
    shuffled_attr.push_back(attribution[i]);
  }
  const auto permuted = aggregate(shuffled, shuffled_attr, f);
  for (std::size_t i = 0; i < serial.size(); ++i) check_same(serial[i], permuted[i]);
}

TEST_CASE("removing a beneficiary changes only its practice") {
  GeneratorConfig g;
  g.n_parents = 20;
  g.n_independent_practices = 30;
  const auto f = generate_frame(g, 25);
  auto bens = generate_beneficiaries(f, ClaimsConfig{}, 26);
  auto attribution = attribute(bens, f);
  const auto before = aggregate(bens, attribution, f);
  std::size_t victim = 0;
  while (attribution[victim] == kUnattributed) ++victim;
  const auto owner = attribution[victim];
  bens.erase(bens.begin() + static_cast<std::ptrdiff_t>(victim));
  attribution.erase(attribution.begin() + static_cast<std::ptrdiff_t>(victim));
  const auto after = aggregate(bens, attribution, f);
  for (std::size_t i = 0; i < before.size(); ++i) {
    if (static_cast<std::int64_t>(i) == owner) {
      CHECK(after[i].practice_size == before[i].practice_size - 1);
    } else {
      check_same(before[i], after[i]);
    }
  }
}

TEST_CASE("unlinked practices receive no attribution") {
  GeneratorConfig g;
  g.n_parents = 50;
  g.n_independent_practices = 100;
  const auto f = generate_frame(g, 27);
  ClaimsConfig c;
  c.unlinked_practice_fraction = 0.3;
  const auto bens = generate_beneficiaries(f, c, 28);
  const auto agg = aggregate(bens, attribute(bens, f), f);
  const auto empty = std::count_if(agg.begin(), agg.end(),
                                   [](const ClaimsAggregate& a) { return a.practice_size == 0; });
  const double share = static_cast<double>(empty) / static_cast<double>(agg.size());
  CHECK(share > 0.2);
  CHECK(share < 0.4);
}
