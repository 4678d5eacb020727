#include <benchmark/benchmark.h>

#include <vector>

#include "svyimp/claims.hpp"
#include "svyimp/frame.hpp"
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

Execution exec_of(const benchmark::State& state) {
  return state.range(1) == 0 ? Execution::serial : Execution::parallel;
}

void BM_CrossProduct(benchmark::State& state) {
  const auto n = state.range(0);
  const auto a = random_matrix(n, 24, 1);
  const auto b = random_matrix(n, 16, 2);
  const auto exec = exec_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(cross_product(exec, a, b));
  state.SetItemsProcessed(state.iterations() * n);
}

void BM_ClusterSums(benchmark::State& state) {
  const auto n = state.range(0);
  std::vector<std::int64_t> cluster(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) cluster[static_cast<std::size_t>(i)] = i / 6;
  const auto index = ClusterIndex::build(cluster, (n + 5) / 6);
  const auto m = random_matrix(n, 16, 3);
  const auto exec = exec_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(cluster_sums(exec, index, m));
  state.SetItemsProcessed(state.iterations() * n);
}

void BM_ImputeRows(benchmark::State& state) {
  const auto n = state.range(0);
  PatternDraw p;
  for (std::int64_t i = 0; i < n; ++i) p.rows.push_back(i);
  p.missing = {0, 1, 2, 3};
  p.observed = {4, 5, 6, 7, 8, 9, 10, 11};
  p.regression = random_matrix(4, 8, 4) * 0.1;
  p.cond_chol = Eigen::MatrixXd::Identity(4, 4);
  const auto mean = random_matrix(n, 12, 5);
  const auto normals = random_matrix(4, n, 6);
  auto y = random_matrix(n, 12, 7);
  const auto exec = exec_of(state);
  for (auto _ : state) {
    impute_rows(exec, y, mean, p, normals);
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * n);
}

void BM_Aggregate(benchmark::State& state) {
  GeneratorConfig gen;
  gen.n_parents = state.range(0);
  gen.n_independent_practices = 4 * state.range(0);
  const auto frame = generate_frame(gen, 11);
  const auto bens = generate_beneficiaries(frame, ClaimsConfig{}, 12);
  const auto attribution = attribute(bens, frame);
  const auto exec = exec_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(aggregate(bens, attribution, frame, exec));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(bens.size()));
}

}  // namespace

BENCHMARK(BM_CrossProduct)->ArgsProduct({{4096, 65536}, {0, 1}});
BENCHMARK(BM_ClusterSums)->ArgsProduct({{4096, 65536}, {0, 1}});
BENCHMARK(BM_ImputeRows)->ArgsProduct({{4096, 65536}, {0, 1}});
BENCHMARK(BM_Aggregate)->ArgsProduct({{100, 570}, {0, 1}});

BENCHMARK_MAIN();
