#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <type_traits>

#include <Eigen/Dense>

namespace svyimp {

using Rng = std::mt19937_64;

/// 64-bit FNV-1a of a label; used to fold names (scenario, stage) into seeds.
std::uint64_t hash_label(std::string_view label);

/// Mixes `value` into `seed` with a splitmix64 finalizer.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t value);

inline std::uint64_t derive_seed(std::uint64_t seed) { return seed; }

/// Derives an independent stream seed from a base seed and a path of
/// integers and/or labels, e.g. derive_seed(base, replicate, "MI2").
template <class First, class... Rest>
std::uint64_t derive_seed(std::uint64_t seed, const First& first, const Rest&... rest) {
  std::uint64_t part = 0;
  if constexpr (std::is_convertible_v<const First&, std::string_view>) {
    part = hash_label(std::string_view(first));
  } else {
    part = static_cast<std::uint64_t>(first);
  }
  return derive_seed(mix_seed(seed, part), rest...);
}

double draw_normal(Rng& rng);
void fill_normal(Rng& rng, std::span<double> out);
double draw_uniform(Rng& rng);
double draw_chi_squared(Rng& rng, double df);
std::int64_t draw_poisson(Rng& rng, double mean);
double draw_beta(Rng& rng, double a, double b);
bool draw_bernoulli(Rng& rng, double p);

/// Draws from a Wishart(df, scale) distribution via the Bartlett decomposition.
/// `scale` must be symmetric positive definite and df > dim - 1.
Eigen::MatrixXd draw_wishart(Rng& rng, double df, const Eigen::MatrixXd& scale);

/// Inverse-Wishart with density proportional to
/// |S|^{-(df+r+1)/2} exp(-tr(scale S^{-1})/2); E[S] = scale / (df - r - 1).
Eigen::MatrixXd draw_inverse_wishart(Rng& rng, double df, const Eigen::MatrixXd& scale);

}  // namespace svyimp
