#include <doctest.h>

#include <cmath>
#include <vector>

#include "svyimp/random.hpp"
#include "svyimp/stats.hpp"

using namespace svyimp;

TEST_CASE("mean and sample variance") {
  const std::vector<double> x = {1.0, 2.0, 3.0, 4.0};
  CHECK(stats::mean(x) == 2.5);
  CHECK(stats::sample_variance(x) == doctest::Approx(5.0 / 3.0));
}

TEST_CASE("pearson") {
  const std::vector<double> x = {1, 2, 3, 4, 5};
  const std::vector<double> y = {2, 4, 6, 8, 10};
  const std::vector<double> neg = {5, 4, 3, 2, 1};
  const std::vector<double> flat = {3, 3, 3, 3, 3};
  CHECK(*stats::pearson(x, y) == doctest::Approx(1.0));
  CHECK(*stats::pearson(x, neg) == doctest::Approx(-1.0));
  CHECK_FALSE(stats::pearson(x, flat).has_value());
}

TEST_CASE("anova_icc recovers a known ICC") {
  Rng rng(9);
  std::vector<double> v;
  std::vector<std::int64_t> g;
  for (std::int64_t c = 0; c < 3000; ++c) {
    const double u = std::sqrt(0.4) * draw_normal(rng);
    for (int k = 0; k < 5; ++k) {
      v.push_back(u + std::sqrt(0.6) * draw_normal(rng));
      g.push_back(c);
    }
  }
  CHECK(stats::anova_icc(v, g) == doctest::Approx(0.4).epsilon(0.05));
}

TEST_CASE("anova_icc is negative when group means do not differ") {
  const std::vector<double> v = {1, 2, 1, 2, 1, 2};
  const std::vector<std::int64_t> g = {0, 0, 1, 1, 2, 2};
  CHECK(stats::anova_icc(v, g) < 0.0);
}

TEST_CASE("autocorrelation") {
  const std::vector<double> alt = {1, -1, 1, -1, 1, -1, 1, -1};
  CHECK(stats::autocorrelation(alt, 1) < -0.8);
  const std::vector<double> flat = {2, 2, 2, 2};
  CHECK(stats::autocorrelation(flat, 1) == 0.0);
  const std::vector<double> shorter = {1, 2};
  CHECK(stats::autocorrelation(shorter, 1) == 0.0);
}

TEST_CASE("logit and logistic are inverse") {
  for (double p : {0.01, 0.3, 0.5, 0.9}) CHECK(stats::logistic(stats::logit(p)) == doctest::Approx(p));
  CHECK(stats::logistic(0.0) == 0.5);
}
