#include <doctest.h>

#include <vector>

#include <omp.h>

#include "svyimp/kernels.hpp"
#include "svyimp/random.hpp"

using namespace svyimp;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = draw_normal(rng);
  return m;
}

double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  REQUIRE(a.rows() == b.rows());
  REQUIRE(a.cols() == b.cols());
  return a.size() == 0 ? 0.0 : (a - b).cwiseAbs().maxCoeff();
}

struct Threads {
  int saved = omp_get_max_threads();
  explicit Threads(int n) { omp_set_num_threads(n); }
  ~Threads() { omp_set_num_threads(saved); }
};

PatternDraw pattern(Eigen::Index n, std::uint64_t seed) {
  PatternDraw p;
  for (Eigen::Index i = 0; i < n; i += 2) p.rows.push_back(i);
  p.missing = {0, 3};
  p.observed = {1, 2, 4};
  p.regression = random_matrix(2, 3, seed) * 0.3;
  p.cond_chol = Eigen::MatrixXd::Zero(2, 2);
  p.cond_chol << 1.0, 0.0, 0.4, 0.7;
  return p;
}

}  // namespace

TEST_CASE("cross_product matches Eigen and agrees across executions") {
  for (Eigen::Index n : {0, 1, 255, 256, 257, 3000}) {
    const auto a = random_matrix(n, 5, 1);
    const auto b = random_matrix(n, 3, 2);
    const Eigen::MatrixXd ref = a.transpose() * b;
    CHECK(max_abs_diff(serial::cross_product(a, b), ref) < 1e-10);
    CHECK(max_abs_diff(parallel::cross_product(a, b), ref) < 1e-10);
  }
}

TEST_CASE("cluster_sums serial and parallel agree with a direct loop") {
  const Eigen::Index n = 2000;
  std::vector<std::int64_t> cluster(n);
  for (Eigen::Index i = 0; i < n; ++i) cluster[i] = (i * 7919) % 37;
  const auto index = ClusterIndex::build(cluster, 40);  // clusters 37..39 are empty
  CHECK(index.clusters() == 40);
  CHECK(index.size(39) == 0);
  const auto m = random_matrix(n, 4, 3);
  Eigen::MatrixXd ref = Eigen::MatrixXd::Zero(40, 4);
  for (Eigen::Index i = 0; i < n; ++i) ref.row(cluster[i]) += m.row(i);
  CHECK(max_abs_diff(serial::cluster_sums(index, m), ref) < 1e-10);
  CHECK(max_abs_diff(parallel::cluster_sums(index, m), ref) < 1e-10);
  for (Eigen::Index i = 0; i < n; ++i) CHECK(index.row_cluster[i] == cluster[i]);
}

TEST_CASE("impute_rows serial and parallel agree and touch only missing cells") {
  const Eigen::Index n = 1200;
  const auto p = pattern(n, 4);
  const auto mean = random_matrix(n, 5, 5);
  const auto normals = random_matrix(2, static_cast<Eigen::Index>(p.rows.size()), 6);
  const auto y0 = random_matrix(n, 5, 7);
  Eigen::MatrixXd ys = y0, yp = y0;
  serial::impute_rows(ys, mean, p, normals);
  parallel::impute_rows(yp, mean, p, normals);
  CHECK(max_abs_diff(ys, yp) < 1e-12);

  // Direct formula on one row.
  const auto r = p.rows[5];
  Eigen::VectorXd yo(3), mo(3);
  for (int k = 0; k < 3; ++k) {
    yo(k) = y0(r, p.observed[k]);
    mo(k) = mean(r, p.observed[k]);
  }
  const Eigen::VectorXd expect = Eigen::Vector2d(mean(r, 0), mean(r, 3)) +
                                 p.regression * (yo - mo) + p.cond_chol * normals.col(5);
  CHECK(ys(r, 0) == doctest::Approx(expect(0)).epsilon(1e-12));
  CHECK(ys(r, 3) == doctest::Approx(expect(1)).epsilon(1e-12));

  for (Eigen::Index i = 0; i < n; ++i) {
    for (int c : p.observed) CHECK(ys(i, c) == y0(i, c));
    if (i % 2 == 1) CHECK(ys.row(i) == y0.row(i));
  }
}

TEST_CASE("parallel kernels do not depend on the thread count") {
  const Eigen::Index n = 5000;
  const auto a = random_matrix(n, 6, 8);
  const auto b = random_matrix(n, 4, 9);
  std::vector<std::int64_t> cluster(n);
  for (Eigen::Index i = 0; i < n; ++i) cluster[i] = i / 9;
  const auto index = ClusterIndex::build(cluster, (n + 8) / 9);
  Eigen::MatrixXd cp1, cs1;
  {
    Threads t(1);
    cp1 = parallel::cross_product(a, b);
    cs1 = parallel::cluster_sums(index, a);
  }
  for (int threads : {2, 3, 8}) {
    Threads t(threads);
    CHECK(parallel::cross_product(a, b) == cp1);
    CHECK(parallel::cluster_sums(index, a) == cs1);
  }
}
