#pragma once

#include <cstdint>
#include <optional>
#include <span>

namespace svyimp::stats {

double mean(std::span<const double> x);
/// Unbiased (n - 1) sample variance; requires n >= 2.
double sample_variance(std::span<const double> x);

/// Pearson correlation; empty when either input has zero variance.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

/// One-way ANOVA intraclass correlation of `values` grouped by `groups`.
/// Singleton groups carry no within-group information and are ignored.
double anova_icc(std::span<const double> values, std::span<const std::int64_t> groups);

/// Lag-k autocorrelation of a trace; 0 when the trace is constant.
double autocorrelation(std::span<const double> trace, std::size_t lag = 1);

double logit(double p);
double logistic(double x);

}  // namespace svyimp::stats
