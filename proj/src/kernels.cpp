#include "svyimp/kernels.hpp"

#include <omp.h>

namespace svyimp {

ClusterIndex ClusterIndex::build(std::span<const std::int64_t> cluster_of_row,
                                 std::int64_t n_clusters) {
  ClusterIndex index;
  index.offsets.assign(n_clusters + 1, 0);
  index.row_cluster.assign(cluster_of_row.begin(), cluster_of_row.end());
  for (auto c : cluster_of_row) ++index.offsets[c + 1];
  for (std::int64_t c = 0; c < n_clusters; ++c) index.offsets[c + 1] += index.offsets[c];
  index.rows.resize(cluster_of_row.size());
  std::vector<std::int64_t> cursor(index.offsets.begin(), index.offsets.end() - 1);
  for (std::size_t i = 0; i < cluster_of_row.size(); ++i)
    index.rows[cursor[cluster_of_row[i]]++] = static_cast<std::int64_t>(i);
  return index;
}

namespace {

void impute_one(Eigen::MatrixXd& y, const Eigen::MatrixXd& mean, const PatternDraw& pattern,
                const Eigen::MatrixXd& normals, std::size_t k) {
  const auto row = pattern.rows[k];
  const auto n_mis = static_cast<Eigen::Index>(pattern.missing.size());
  const auto n_obs = static_cast<Eigen::Index>(pattern.observed.size());
  Eigen::VectorXd resid(n_obs);
  for (Eigen::Index o = 0; o < n_obs; ++o)
    resid(o) = y(row, pattern.observed[o]) - mean(row, pattern.observed[o]);
  Eigen::VectorXd draw = pattern.cond_chol * normals.col(static_cast<Eigen::Index>(k));
  if (n_obs > 0) draw += pattern.regression * resid;
  for (Eigen::Index m = 0; m < n_mis; ++m)
    y(row, pattern.missing[m]) = mean(row, pattern.missing[m]) + draw(m);
}

}  // namespace

namespace serial {

Eigen::MatrixXd cross_product(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(a.cols(), b.cols());
  for (Eigen::Index k = 0; k < a.rows(); ++k)
    for (Eigen::Index j = 0; j < b.cols(); ++j)
      for (Eigen::Index i = 0; i < a.cols(); ++i) out(i, j) += a(k, i) * b(k, j);
  return out;
}

Eigen::MatrixXd cluster_sums(const ClusterIndex& index, const Eigen::MatrixXd& m) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(index.clusters(), m.cols());
  for (std::size_t i = 0; i < index.row_cluster.size(); ++i)
    out.row(index.row_cluster[i]) += m.row(static_cast<Eigen::Index>(i));
  return out;
}

void impute_rows(Eigen::MatrixXd& y, const Eigen::MatrixXd& mean, const PatternDraw& pattern,
                 const Eigen::MatrixXd& normals) {
  for (std::size_t k = 0; k < pattern.rows.size(); ++k) impute_one(y, mean, pattern, normals, k);
}

}  // namespace serial

namespace parallel {

Eigen::MatrixXd cross_product(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::Index n = a.rows();
  const Eigen::Index blocks = (n + kBlockRows - 1) / kBlockRows;
  std::vector<Eigen::MatrixXd> partial(static_cast<std::size_t>(blocks));
#pragma omp parallel for schedule(static)
  for (Eigen::Index blk = 0; blk < blocks; ++blk) {
    const Eigen::Index start = blk * kBlockRows;
    const Eigen::Index len = std::min<Eigen::Index>(kBlockRows, n - start);
    partial[blk].noalias() = a.middleRows(start, len).transpose() * b.middleRows(start, len);
  }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(a.cols(), b.cols());
  for (const auto& p : partial) out += p;
  return out;
}

Eigen::MatrixXd cluster_sums(const ClusterIndex& index, const Eigen::MatrixXd& m) {
  const auto n_clusters = index.clusters();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n_clusters, m.cols());
#pragma omp parallel for schedule(static)
  for (std::int64_t c = 0; c < n_clusters; ++c)
    for (auto k = index.offsets[c]; k < index.offsets[c + 1]; ++k) out.row(c) += m.row(index.rows[k]);
  return out;
}

void impute_rows(Eigen::MatrixXd& y, const Eigen::MatrixXd& mean, const PatternDraw& pattern,
                 const Eigen::MatrixXd& normals) {
  const auto n = static_cast<std::int64_t>(pattern.rows.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t k = 0; k < n; ++k)
    impute_one(y, mean, pattern, normals, static_cast<std::size_t>(k));
}

}  // namespace parallel

}  // namespace svyimp
