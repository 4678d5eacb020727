#include "svyimp/random.hpp"

#include <cmath>

#include "svyimp/error.hpp"

namespace svyimp {

std::uint64_t hash_label(std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t value) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (value + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double draw_normal(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

void fill_normal(Rng& rng, std::span<double> out) {
  std::normal_distribution<double> dist(0.0, 1.0);
  for (double& x : out) x = dist(rng);
}

double draw_uniform(Rng& rng) {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

double draw_chi_squared(Rng& rng, double df) {
  std::chi_squared_distribution<double> dist(df);
  return dist(rng);
}

std::int64_t draw_poisson(Rng& rng, double mean) {
  if (mean <= 0.0) return 0;
  std::poisson_distribution<std::int64_t> dist(mean);
  return dist(rng);
}

double draw_beta(Rng& rng, double a, double b) {
  std::gamma_distribution<double> ga(a, 1.0);
  std::gamma_distribution<double> gb(b, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  return x / (x + y);
}

bool draw_bernoulli(Rng& rng, double p) { return draw_uniform(rng) < p; }

Eigen::MatrixXd draw_wishart(Rng& rng, double df, const Eigen::MatrixXd& scale) {
  const auto dim = scale.rows();
  if (df <= static_cast<double>(dim) - 1.0) {
    throw NumericalError("Wishart degrees of freedom must exceed dimension - 1");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(scale);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("Wishart scale matrix is not positive definite");
  }
  Eigen::MatrixXd bartlett = Eigen::MatrixXd::Zero(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    bartlett(i, i) = std::sqrt(draw_chi_squared(rng, df - static_cast<double>(i)));
    for (Eigen::Index j = 0; j < i; ++j) bartlett(i, j) = draw_normal(rng);
  }
  const Eigen::MatrixXd factor = llt.matrixL() * bartlett;
  return factor * factor.transpose();
}

Eigen::MatrixXd draw_inverse_wishart(Rng& rng, double df, const Eigen::MatrixXd& scale) {
  const auto dim = scale.rows();
  Eigen::LLT<Eigen::MatrixXd> scale_llt(scale);
  if (scale_llt.info() != Eigen::Success) {
    throw NumericalError("inverse-Wishart scale matrix is not positive definite");
  }
  const Eigen::MatrixXd scale_inv = scale_llt.solve(Eigen::MatrixXd::Identity(dim, dim));
  const Eigen::MatrixXd w = draw_wishart(rng, df, 0.5 * (scale_inv + scale_inv.transpose()));
  Eigen::LLT<Eigen::MatrixXd> w_llt(w);
  if (w_llt.info() != Eigen::Success) {
    throw NumericalError("Wishart draw is not positive definite");
  }
  const Eigen::MatrixXd out = w_llt.solve(Eigen::MatrixXd::Identity(dim, dim));
  return 0.5 * (out + out.transpose());
}

}  // namespace svyimp
