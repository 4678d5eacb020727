#include <doctest.h>

#include <cmath>
#include <vector>

#include "svyimp/error.hpp"
#include "svyimp/frame.hpp"
#include "svyimp/stats.hpp"

using namespace svyimp;

namespace {

Frame practices_only(const std::vector<double>& outcomes) {
  Frame f;
  f.generation_config.outcome_count = 1;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    Practice p;
    p.id = static_cast<std::int64_t>(i);
    p.np = 4;
    p.npcp = 3;
    p.tin = std::to_string(100 + i);
    p.true_outcomes = {outcomes[i]};
    f.practices.push_back(p);
  }
  f.index();
  return f;
}

GeneratorConfig large_config() {
  GeneratorConfig c;
  c.n_parents = 1000;
  c.n_independent_practices = 400;
  c.outcome_count = 1;
  c.cluster_icc = 0.3;
  c.covariate_outcome_corr = 0.15;
  return c;
}

}  // namespace

TEST_CASE("degenerate sizes") {
  GeneratorConfig c;
  c.n_parents = 1;
  c.mean_subsidiaries_per_parent = 0.0;
  c.n_independent_practices = 5;
  const auto f = generate_frame(c, 1);
  CHECK(f.parents.size() == 1);
  CHECK(f.subsidiaries.empty());
  CHECK(f.practices.size() == 5);
  CHECK(f.parents[0].nos == 0);
  for (const auto& p : f.practices) CHECK(p.independent());
}

TEST_CASE("generation is deterministic") {
  GeneratorConfig c;
  c.n_parents = 40;
  c.n_independent_practices = 50;
  const auto a = generate_frame(c, 99);
  const auto b = generate_frame(c, 99);
  REQUIRE(a.practices.size() == b.practices.size());
  for (std::size_t i = 0; i < a.practices.size(); ++i) {
    CHECK(a.practices[i].npcp == b.practices[i].npcp);
    CHECK(a.practices[i].true_outcomes == b.practices[i].true_outcomes);
  }
  const auto d = generate_frame(c, 100);
  CHECK(d.practices.front().true_outcomes != a.practices.front().true_outcomes);
}

TEST_CASE("invalid configs name the field") {
  GeneratorConfig c;
  c.cluster_icc = 1.0;
  CHECK_THROWS_WITH_AS(generate_frame(c, 1), doctest::Contains("cluster_icc"), ConfigError);
  c = GeneratorConfig{};
  c.n_parents = 0;
  CHECK_THROWS_WITH_AS(generate_frame(c, 1), doctest::Contains("n_parents"), ConfigError);
  c = GeneratorConfig{};
  c.covariate_outcome_corr = -1.0;
  CHECK_THROWS_WITH_AS(generate_frame(c, 1), doctest::Contains("covariate_outcome_corr"),
                       ConfigError);
}

TEST_CASE("frame invariants hold across seeds") {
  GeneratorConfig c;
  c.n_parents = 60;
  c.n_independent_practices = 80;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto f = generate_frame(c, seed);
    CHECK_NOTHROW(f.validate());
    for (const auto& p : f.parents) {
      CHECK(static_cast<std::int64_t>(f.subsidiaries_by_parent[p.id].size()) == p.nos);
      CHECK(p.pertot >= 0.0);
      CHECK(p.pertot <= 1.0);
    }
    for (const auto& p : f.practices) {
      CHECK(p.npcp >= 3);
      CHECK(p.npcp <= p.np);
    }
  }
}

TEST_CASE("validate catches broken references") {
  GeneratorConfig c;
  c.n_parents = 5;
  auto f = generate_frame(c, 3);
  REQUIRE_FALSE(f.subsidiaries.empty());
  f.subsidiaries[0].parent_id = 999;
  CHECK_THROWS_AS(f.validate(), FormatError);
}

TEST_CASE("population_mean examples") {
  CHECK(population_mean(practices_only({0.0, 1.0, 2.0}), 0, Level::practice) == 1.0);
  CHECK(population_mean(practices_only({0.7, 0.7, 0.7, 0.7}), 0, Level::practice) ==
        doctest::Approx(0.7));
  CHECK_THROWS_AS(population_mean(practices_only({1.0}), 1, Level::practice), ConfigError);
}

TEST_CASE("population_mean matches an independent accumulation at every level") {
  GeneratorConfig c;
  c.n_parents = 80;
  c.n_independent_practices = 100;
  const auto f = generate_frame(c, 17);
  long double total = 0.0L;
  for (const auto& p : f.practices) total += p.true_outcomes[1];
  CHECK(population_mean(f, 1, Level::practice) ==
        doctest::Approx(static_cast<double>(total / f.practices.size())).epsilon(1e-12));

  std::vector<double> sums(f.subsidiaries.size(), 0.0), counts(f.subsidiaries.size(), 0.0);
  for (const auto& p : f.practices) {
    if (!p.os_id) continue;
    sums[*p.os_id] += p.true_outcomes[0];
    counts[*p.os_id] += 1.0;
  }
  double acc = 0.0, units = 0.0;
  for (std::size_t s = 0; s < sums.size(); ++s) {
    if (counts[s] == 0.0) continue;
    acc += sums[s] / counts[s];
    units += 1.0;
  }
  CHECK(population_mean(f, 0, Level::subsidiary) == doctest::Approx(acc / units).epsilon(1e-12));
}

TEST_CASE("subsidiary ICC and covariate correlation are calibrated") {
  const auto f = generate_frame(large_config(), 2024);
  REQUIRE(f.practices.size() >= 5000);
  std::vector<double> y, npcp, y_sys;
  std::vector<std::int64_t> groups;
  for (const auto& p : f.practices) {
    y.push_back(p.true_outcomes[0]);
    npcp.push_back(static_cast<double>(p.npcp));
    if (p.os_id) {
      y_sys.push_back(p.true_outcomes[0]);
      groups.push_back(*p.os_id);
    }
  }
  const double icc = stats::anova_icc(y_sys, groups);
  CHECK(icc >= 0.25);
  CHECK(icc <= 0.35);
  CHECK(*stats::pearson(npcp, y) == doctest::Approx(0.15).epsilon(0.05 / 0.15));
}

TEST_CASE("frame and unit covariates") {
  GeneratorConfig c;
  c.n_parents = 10;
  c.n_independent_practices = 3;
  const auto f = generate_frame(c, 4);
  const auto indep = f.independent_practices();
  REQUIRE(indep.size() == 3);
  CHECK(frame_covariate(f, indep[0], "nach") == 0.0);
  CHECK(frame_covariate(f, indep[0], "pertot") == 1.0);
  for (const auto& p : f.practices) {
    if (!p.os_id) continue;
    const auto parent = *f.parent_of_practice(p.id);
    CHECK(frame_covariate(f, p.id, "nach") == static_cast<double>(f.parents[parent].nach));
    CHECK(frame_covariate(f, p.id, "npcp") == static_cast<double>(p.npcp));
    break;
  }
  CHECK_THROWS_AS(frame_covariate(f, 0, "bogus"), ConfigError);
}
