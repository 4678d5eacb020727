#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "support.hpp"
#include "svyimp/error.hpp"
#include "svyimp/random.hpp"
#include "svyimp/sampling.hpp"

using namespace svyimp;
using svyimp::testing::toy_frame;

namespace {

StageProbabilitySpec srs(std::int64_t n, bool take_all = false) {
  StageProbabilitySpec s;
  s.method = StageMethod::srswor;
  s.sample_size = n;
  s.take_all_if_smaller = take_all;
  return s;
}

StageProbabilitySpec pps(std::int64_t n, const std::string& measure) {
  StageProbabilitySpec s;
  s.method = StageMethod::pps;
  s.sample_size = n;
  s.size_measure = measure;
  return s;
}

DesignSpec three_level(StageProbabilitySpec a, StageProbabilitySpec b, StageProbabilitySpec c) {
  DesignSpec d;
  d.design = DesignKind::three_level;
  d.stage_specs = {a, b, c};
  return d;
}

DesignSpec single_level(StageProbabilitySpec a) {
  DesignSpec d;
  d.design = DesignKind::single_level;
  d.stage_specs = {a};
  return d;
}

// Smallest certainty set C consistent with the rule: every unit outside C
// gets (n - |C|) s_i / sum_{not C} s <= 1 and every unit in C would exceed it.
std::vector<double> pps_by_enumeration(const std::vector<double>& s, std::int64_t n) {
  const std::size_t k = s.size();
  std::vector<double> best;
  std::size_t best_size = k + 1;
  for (std::uint32_t mask = 0; mask < (1u << k); ++mask) {
    const auto c = static_cast<std::size_t>(std::popcount(mask));
    if (static_cast<std::int64_t>(c) > n || c >= best_size) continue;
    double rest = 0.0;
    for (std::size_t i = 0; i < k; ++i)
      if (!(mask >> i & 1u)) rest += s[i];
    const double ratio = static_cast<double>(n - static_cast<std::int64_t>(c)) / rest;
    bool ok = true;
    if (c == k) ok = static_cast<std::int64_t>(c) == n;
    for (std::size_t i = 0; i < k && ok && c < k; ++i) {
      const bool in = mask >> i & 1u;
      if (in != (ratio * s[i] >= 1.0)) ok = false;
    }
    if (!ok) continue;
    std::vector<double> pi(k);
    for (std::size_t i = 0; i < k; ++i) pi[i] = (mask >> i & 1u) ? 1.0 : ratio * s[i];
    best = pi;
    best_size = c;
  }
  return best;
}

}  // namespace

TEST_CASE("SRSWOR 2 of 4 gives 0.5 everywhere") {
  const auto f = toy_frame(0, 0, 0, 4);
  const auto p = compute_stage_probabilities(f, single_level(srs(2)));
  REQUIRE(p.first.size() == 4);
  for (double v : p.first) CHECK(v == 0.5);
}

TEST_CASE("PPS proportional to size") {
  const std::vector<double> sizes = {1.0, 1.0, 2.0};
  const auto pi = pps_inclusion_probabilities(sizes, 1);
  CHECK(pi[0] == doctest::Approx(0.25));
  CHECK(pi[1] == doctest::Approx(0.25));
  CHECK(pi[2] == doctest::Approx(0.5));
}

TEST_CASE("PPS certainty selection matches enumeration of the iterative rule") {
  const std::vector<double> dominant = {10.0, 1.0, 1.0, 1.0, 1.0};
  const auto pi = pps_inclusion_probabilities(dominant, 2);
  CHECK(pi[0] == 1.0);
  for (std::size_t i = 1; i < pi.size(); ++i) CHECK(pi[i] == doctest::Approx(0.25));

  Rng rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t k = 2 + static_cast<std::size_t>(draw_uniform(rng) * 9.0);
    std::vector<double> s(k);
    for (auto& v : s) v = std::exp(2.0 * draw_normal(rng));
    const auto n = 1 + static_cast<std::int64_t>(draw_uniform(rng) * static_cast<double>(k));
    const auto got = pps_inclusion_probabilities(s, n);
    const auto want = pps_by_enumeration(s, n);
    REQUIRE(want.size() == k);
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
      CHECK(got[i] > 0.0);
      CHECK(got[i] <= 1.0);
      total += got[i];
    }
    CHECK(total == doctest::Approx(static_cast<double>(n)));
  }
}

TEST_CASE("census gives unit weights") {
  const auto f = toy_frame(0, 0, 0, 7);
  const auto draw = draw_sample(f, single_level(srs(7)), 1);
  REQUIRE(draw.units.size() == 7);
  for (const auto& u : draw.units) {
    CHECK(u.pi_final == 1.0);
    CHECK(u.weight == 1.0);
  }
}

TEST_CASE("halving at every stage gives pi_final 0.125") {
  const auto f = toy_frame(4, 2, 2);
  const auto draw = draw_sample(f, three_level(srs(2), srs(1), srs(1)), 5);
  REQUIRE(draw.units.size() == 2);
  for (const auto& u : draw.units) {
    CHECK(u.pi1 == 0.5);
    CHECK(u.pi2 == 0.5);
    CHECK(u.pi3 == 0.5);
    CHECK(u.pi_final == 0.125);
    CHECK(u.weight == 8.0);
  }
  CHECK(draw.parents.size() == 2);
  CHECK(draw.subsidiaries.size() == 2);
}

TEST_CASE("empirical inclusion frequencies match pi_final") {
  const auto f = toy_frame(3, 2, 2);
  const auto spec = three_level(pps(2, "np"), srs(1), srs(1));
  const auto probs = compute_stage_probabilities(f, spec);
  const int reps = 100000;
  std::vector<int> hits(f.practices.size(), 0);
  std::vector<double> pi(f.practices.size(), 0.0);
  double sum_w = 0.0, sum_w2 = 0.0;
  for (int r = 0; r < reps; ++r) {
    const auto draw = draw_sample(f, spec, static_cast<std::uint64_t>(r));
    double w = 0.0;
    for (const auto& u : draw.units) {
      ++hits[u.practice_id];
      pi[u.practice_id] = u.pi_final;
      w += u.weight;
    }
    sum_w += w;
    sum_w2 += w * w;
  }
  for (std::size_t i = 0; i < f.practices.size(); ++i) {
    const auto parent = *f.parent_of_practice(static_cast<std::int64_t>(i));
    const double expected = probs.first[parent] * 0.5 * 0.5;
    CHECK(pi[i] == doctest::Approx(expected));
    const double freq = static_cast<double>(hits[i]) / reps;
    const double mc_se = std::sqrt(expected * (1.0 - expected) / reps);
    CHECK(std::abs(freq - expected) <= 3.0 * mc_se);
  }
  // Horvitz-Thompson: the weight total estimates the practice count.
  const double mean_w = sum_w / reps;
  const double se_w = std::sqrt((sum_w2 / reps - mean_w * mean_w) / reps);
  CHECK(std::abs(mean_w - static_cast<double>(f.practices.size())) <= 3.0 * se_w + 1e-9);
}

TEST_CASE("product identity and weight bounds on generated frames") {
  GeneratorConfig g;
  g.n_parents = 90;
  g.n_independent_practices = 120;
  const auto f = generate_frame(g, 31);
  auto spec = three_level(pps(8, "npcp"), srs(2, true), srs(3, true));
  spec.strata_by = "nach";
  spec.independent_stage = srs(40);
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const auto draw = draw_sample(f, spec, seed);
    for (const auto& u : draw.units) {
      CHECK(u.pi_final == u.pi1 * u.pi2 * u.pi3);
      CHECK(u.weight == 1.0 / u.pi_final);
      CHECK(u.weight >= 1.0);
      CHECK((u.weight == 1.0) == (u.pi_final == 1.0));
    }
    CHECK(std::is_sorted(draw.units.begin(), draw.units.end(),
                         [](const auto& a, const auto& b) { return a.practice_id < b.practice_id; }));
  }
}

TEST_CASE("draws are deterministic given the seed") {
  GeneratorConfig g;
  g.n_parents = 50;
  g.n_independent_practices = 60;
  const auto f = generate_frame(g, 2);
  auto spec = three_level(srs(10), srs(2, true), srs(2, true));
  spec.independent_stage = srs(20);
  const auto a = draw_sample(f, spec, 77);
  const auto b = draw_sample(f, spec, 77);
  const auto c = draw_sample(f, spec, 78);
  REQUIRE(a.units.size() == b.units.size());
  for (std::size_t i = 0; i < a.units.size(); ++i) CHECK(a.units[i].practice_id == b.units[i].practice_id);
  bool differs = a.units.size() != c.units.size();
  for (std::size_t i = 0; !differs && i < a.units.size(); ++i)
    differs = a.units[i].practice_id != c.units[i].practice_id;
  CHECK(differs);
}

TEST_CASE("strata are terciles of the stratifier") {
  const auto f = toy_frame(30, 1, 1);
  auto spec = three_level(srs(2), srs(1), srs(1));
  spec.strata_by = "nach";
  const auto p = compute_stage_probabilities(f, spec);
  CHECK(p.n_strata == 3);
  std::vector<int> counts(3, 0);
  for (auto h : p.first_stratum) ++counts[h];
  CHECK(counts == std::vector<int>{10, 10, 10});
  // nach equals the parent id in the toy frame, so strata follow id order.
  CHECK(p.first_stratum[0] == 0);
  CHECK(p.first_stratum[29] == 2);
  for (double v : p.first) CHECK(v == doctest::Approx(0.2));
}

TEST_CASE("design errors") {
  const auto f = toy_frame(3, 1, 2);
  CHECK_THROWS_AS(compute_stage_probabilities(f, three_level(srs(4), srs(1), srs(1))),
                  DesignError);
  CHECK_THROWS_AS(compute_stage_probabilities(f, three_level(srs(2), srs(2), srs(1))),
                  DesignError);
  CHECK_NOTHROW(compute_stage_probabilities(f, three_level(srs(2), srs(2, true), srs(1))));
  const auto with_indep = toy_frame(3, 1, 2, 4);
  CHECK_THROWS_AS(compute_stage_probabilities(with_indep, three_level(srs(2), srs(1), srs(1))),
                  DesignError);
}

TEST_CASE("design spec validation") {
  DesignSpec d;
  d.design = DesignKind::two_level;
  d.stage_specs = {srs(1)};
  CHECK_THROWS_AS(d.validate(), ConfigError);
  StageProbabilitySpec bad = srs(0);
  CHECK_THROWS_AS(bad.validate("stage"), ConfigError);
  StageProbabilitySpec no_measure;
  no_measure.method = StageMethod::pps;
  CHECK_THROWS_AS(no_measure.validate("stage"), ConfigError);
}

TEST_CASE("design spec JSON round trip") {
  auto spec = three_level(pps(3, "npcp"), srs(2, true), srs(1));
  spec.strata_by = "nach";
  spec.independent_stage = srs(5);
  const nlohmann::json j = spec;
  const auto back = j.get<DesignSpec>();
  CHECK(back.design == DesignKind::three_level);
  CHECK(back.stage_specs.size() == 3);
  CHECK(back.stage_specs[0].method == StageMethod::pps);
  CHECK(*back.stage_specs[0].size_measure == "npcp");
  CHECK(back.stage_specs[1].take_all_if_smaller);
  CHECK(*back.strata_by == "nach");
  CHECK(back.independent_stage->sample_size == 5);
}

TEST_CASE("external probabilities are used as given") {
  const auto f = toy_frame(0, 0, 0, 4);
  StageProbabilitySpec ext;
  ext.method = StageMethod::external;
  ext.sample_size = 2;
  ext.external_probabilities = {{0, 0.5}, {1, 0.5}, {2, 0.25}, {3, 0.75}};
  const auto p = compute_stage_probabilities(f, single_level(ext));
  CHECK(p.first == std::vector<double>{0.5, 0.5, 0.25, 0.75});
}
