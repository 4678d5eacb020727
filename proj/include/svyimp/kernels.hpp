#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

// Data-parallel building blocks of the Gibbs sweep. Each kernel has a plain
// serial reference and an OpenMP version. The OpenMP versions reduce over
// fixed-size row blocks in block order, so their output does not depend on
// the thread count.

namespace svyimp {

enum class Execution { serial, parallel };

/// Rows grouped by cluster in CSR form: rows of cluster c are
/// rows[offsets[c] .. offsets[c+1]).
struct ClusterIndex {
  std::vector<std::int64_t> offsets;
  std::vector<std::int64_t> rows;
  std::vector<std::int64_t> row_cluster;  // cluster of each row

  static ClusterIndex build(std::span<const std::int64_t> cluster_of_row, std::int64_t n_clusters);
  std::int64_t clusters() const { return static_cast<std::int64_t>(offsets.size()) - 1; }
  std::int64_t size(std::int64_t c) const { return offsets[c + 1] - offsets[c]; }
};

/// Row-wise conditional normal draws for one missingness pattern.
struct PatternDraw {
  std::vector<std::int64_t> rows;       // rows sharing the pattern
  std::vector<int> missing;             // missing column indices
  std::vector<int> observed;            // observed column indices
  Eigen::MatrixXd regression;           // |missing| x |observed|: S_mo S_oo^{-1}
  Eigen::MatrixXd cond_chol;            // lower Cholesky of the conditional covariance
};

inline constexpr std::int64_t kBlockRows = 256;

namespace serial {

/// A' B.
Eigen::MatrixXd cross_product(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);
/// Per-cluster column sums of m (clusters x cols).
Eigen::MatrixXd cluster_sums(const ClusterIndex& index, const Eigen::MatrixXd& m);
/// Fills the pattern's missing cells of y with y_m = mu_m + R (y_o - mu_o) + L z,
/// where mu is the row of `mean` and z is the matching column of the pre-drawn
/// `normals` (|missing| x pattern.rows.size()).
void impute_rows(Eigen::MatrixXd& y, const Eigen::MatrixXd& mean, const PatternDraw& pattern,
                 const Eigen::MatrixXd& normals);

}  // namespace serial

namespace parallel {

Eigen::MatrixXd cross_product(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);
Eigen::MatrixXd cluster_sums(const ClusterIndex& index, const Eigen::MatrixXd& m);
void impute_rows(Eigen::MatrixXd& y, const Eigen::MatrixXd& mean, const PatternDraw& pattern,
                 const Eigen::MatrixXd& normals);

}  // namespace parallel

inline Eigen::MatrixXd cross_product(Execution exec, const Eigen::MatrixXd& a,
                                     const Eigen::MatrixXd& b) {
  return exec == Execution::serial ? serial::cross_product(a, b) : parallel::cross_product(a, b);
}

inline Eigen::MatrixXd cluster_sums(Execution exec, const ClusterIndex& index,
                                    const Eigen::MatrixXd& m) {
  return exec == Execution::serial ? serial::cluster_sums(index, m)
                                   : parallel::cluster_sums(index, m);
}

inline void impute_rows(Execution exec, Eigen::MatrixXd& y, const Eigen::MatrixXd& mean,
                        const PatternDraw& pattern, const Eigen::MatrixXd& normals) {
  if (exec == Execution::serial) {
    serial::impute_rows(y, mean, pattern, normals);
  } else {
    parallel::impute_rows(y, mean, pattern, normals);
  }
}

}  // namespace svyimp
