#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dipper/nuts.hpp"

namespace dipper {

/// Posterior summary of one effect. The interval is equal-tailed at level
/// 1 - alpha with the quantile rule of `stats::quantile_sorted`.
struct FeatureSummary {
  std::string feature_id;
  double median = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  bool significant = false;
  double alpha = 0.10;
  double mean = 0.0;
  double sd = 0.0;
};

/// Significance from an interval: it must exclude zero.
inline bool excludes_zero(double low, double high) { return low > 0.0 || high < 0.0; }

/// Summary from the pooled draws of a single effect. alpha <= 0 never flags
/// significance (the full-support interval always covers zero).
FeatureSummary summarize_draws(std::string feature_id, std::vector<double> draws, double alpha = 0.10);

/// Summaries for (feature id, parameter index) pairs of a draw array.
std::vector<FeatureSummary> summarize(const DrawArray& draws,
                                      const std::vector<std::pair<std::string, int>>& feature_index,
                                      double alpha = 0.10);

}  // namespace dipper
