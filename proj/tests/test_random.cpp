#include <doctest.h>

#include <cmath>
#include <vector>

#include "svyimp/random.hpp"
#include "svyimp/stats.hpp"

using namespace svyimp;

TEST_CASE("hash_label is 64-bit FNV-1a") {
  CHECK(hash_label("") == 0xcbf29ce484222325ULL);
  CHECK(hash_label("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("derive_seed is deterministic and separates paths") {
  CHECK(derive_seed(7, "sample") == derive_seed(7, "sample"));
  CHECK(derive_seed(7, "sample") != derive_seed(7, "response"));
  CHECK(derive_seed(7, 1) != derive_seed(7, 2));
  CHECK(derive_seed(7, "impute", "MI1") != derive_seed(7, "impute", "MI2"));
  CHECK(derive_seed(7, "impute", "MI1") == derive_seed(derive_seed(7, "impute"), "MI1"));
  CHECK(derive_seed(7) == 7);
}

TEST_CASE("normal and chi-squared draws have the right moments") {
  Rng rng(42);
  std::vector<double> z(200000), c(200000);
  for (auto& v : z) v = draw_normal(rng);
  for (auto& v : c) v = draw_chi_squared(rng, 5.0);
  CHECK(stats::mean(z) == doctest::Approx(0.0).epsilon(0.01).scale(1.0));
  CHECK(stats::sample_variance(z) == doctest::Approx(1.0).epsilon(0.01));
  CHECK(stats::mean(c) == doctest::Approx(5.0).epsilon(0.01));
  CHECK(stats::sample_variance(c) == doctest::Approx(10.0).epsilon(0.03));
}

TEST_CASE("poisson and beta draws have the right means") {
  Rng rng(3);
  double ps = 0.0, bs = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    ps += static_cast<double>(draw_poisson(rng, 4.0));
    bs += draw_beta(rng, 2.0, 2.0);
  }
  CHECK(ps / n == doctest::Approx(4.0).epsilon(0.01));
  CHECK(bs / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(draw_poisson(rng, 0.0) == 0);
}

TEST_CASE("Wishart and inverse-Wishart means") {
  Eigen::MatrixXd s(2, 2);
  s << 2.0, 0.5, 0.5, 1.0;
  Rng rng(11);
  const int n = 40000;
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(2, 2), iw = Eigen::MatrixXd::Zero(2, 2);
  for (int i = 0; i < n; ++i) {
    w += draw_wishart(rng, 6.0, s);
    iw += draw_inverse_wishart(rng, 8.0, s);
  }
  w /= n;
  iw /= n;
  // E[W] = df S; E[IW] = S / (df - r - 1).
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      CHECK(w(i, j) == doctest::Approx(6.0 * s(i, j)).epsilon(0.03));
      CHECK(iw(i, j) == doctest::Approx(s(i, j) / 5.0).epsilon(0.04));
    }
}

TEST_CASE("inverse-Wishart draws are symmetric positive definite") {
  Rng rng(5);
  const Eigen::MatrixXd s = Eigen::MatrixXd::Identity(4, 4) * 0.1;
  for (int i = 0; i < 100; ++i) {
    const auto m = draw_inverse_wishart(rng, 5.0, s);
    CHECK((m - m.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(m.llt().info() == Eigen::Success);
  }
}
