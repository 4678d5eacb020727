#include "svyimp/stats.hpp"

#include <cmath>
#include <map>

#include "svyimp/error.hpp"

namespace svyimp::stats {

double mean(std::span<const double> x) {
  if (x.empty()) throw InsufficientDataError("mean of an empty sample");
  double sum = 0.0;
  for (double v : x) sum += v;
  return sum / static_cast<double>(x.size());
}

double sample_variance(std::span<const double> x) {
  if (x.size() < 2) throw InsufficientDataError("variance needs at least two values");
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) return std::nullopt;
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

double anova_icc(std::span<const double> values, std::span<const std::int64_t> groups) {
  if (values.size() != groups.size()) throw InsufficientDataError("anova_icc: size mismatch");
  struct Acc {
    double sum = 0.0;
    std::size_t n = 0;
  };
  std::map<std::int64_t, Acc> acc;
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto& a = acc[groups[i]];
    a.sum += values[i];
    ++a.n;
  }
  std::map<std::int64_t, double> group_mean;
  double total = 0.0;
  std::size_t n = 0;
  std::size_t k = 0;
  double sum_n2 = 0.0;
  for (const auto& [g, a] : acc) {
    if (a.n < 2) continue;
    group_mean[g] = a.sum / static_cast<double>(a.n);
    total += a.sum;
    n += a.n;
    ++k;
    sum_n2 += static_cast<double>(a.n) * static_cast<double>(a.n);
  }
  if (k < 2) throw InsufficientDataError("anova_icc needs at least two groups of size >= 2");
  const double grand = total / static_cast<double>(n);
  double ssb = 0.0, ssw = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto it = group_mean.find(groups[i]);
    if (it == group_mean.end()) continue;
    ssw += (values[i] - it->second) * (values[i] - it->second);
  }
  for (const auto& [g, m] : group_mean) {
    ssb += static_cast<double>(acc[g].n) * (m - grand) * (m - grand);
  }
  const double msb = ssb / static_cast<double>(k - 1);
  const double msw = ssw / static_cast<double>(n - k);
  const double n0 = (static_cast<double>(n) - sum_n2 / static_cast<double>(n)) /
                    static_cast<double>(k - 1);
  return (msb - msw) / (msb + (n0 - 1.0) * msw);
}

double autocorrelation(std::span<const double> trace, std::size_t lag) {
  if (trace.size() <= lag + 1) return 0.0;
  const double m = mean(trace);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    den += (trace[i] - m) * (trace[i] - m);
    if (i + lag < trace.size()) num += (trace[i] - m) * (trace[i + lag] - m);
  }
  return den > 0.0 ? num / den : 0.0;
}

double logit(double p) { return std::log(p / (1.0 - p)); }

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace svyimp::stats
