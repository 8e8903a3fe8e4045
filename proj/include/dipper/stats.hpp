#pragma once

#include <span>
#include <vector>

namespace dipper::stats {

double normal_cdf(double x);
double normal_quantile(double p);
/// Upper tail P(X > x) of a chi-squared variable.
double chi_squared_sf(double x, double df);
double chi_squared_quantile(double p, double df);

/// Sample quantile by linear interpolation of order statistics
/// (h = (n - 1) p, the "type 7" rule). `sorted` must be ascending.
double quantile_sorted(std::span<const double> sorted, double p);
double quantile(std::vector<double> values, double p);
double median(std::vector<double> values);

double mean(std::span<const double> values);
/// Sample variance with the n - 1 denominator.
double variance(std::span<const double> values);

struct Interval {
  double low;
  double high;
};

/// Wilson score interval for a binomial proportion at two-sided level `level`.
Interval wilson_interval(std::size_t successes, std::size_t trials, double level = 0.90);

/// One-sample Kolmogorov-Smirnov statistic against a continuous CDF.
template <typename Cdf>
double ks_statistic(std::vector<double> values, Cdf&& cdf);

/// Asymptotic p-value of the KS statistic D for sample size n.
double ks_pvalue(double d, std::size_t n);

/// Pearson chi-squared goodness-of-fit p-value against equal expected counts.
double chi_squared_uniform_pvalue(std::span<const std::size_t> counts);

}  // namespace dipper::stats

#include <algorithm>
#include <cmath>

template <typename Cdf>
double dipper::stats::ks_statistic(std::vector<double> values, Cdf&& cdf) {
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  double d = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double f = cdf(values[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}
