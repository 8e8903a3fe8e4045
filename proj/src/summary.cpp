#include "dipper/summary.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dipper/stats.hpp"

namespace dipper {

FeatureSummary summarize_draws(std::string feature_id, std::vector<double> draws, double alpha) {
  if (draws.empty()) throw std::invalid_argument("summarize_draws: no draws");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw std::domain_error("alpha must lie in [0, 1)");
  std::sort(draws.begin(), draws.end());
  FeatureSummary s;
  s.feature_id = std::move(feature_id);
  s.alpha = alpha;
  s.median = stats::quantile_sorted(draws, 0.5);
  s.ci_low = stats::quantile_sorted(draws, alpha / 2.0);
  s.ci_high = stats::quantile_sorted(draws, 1.0 - alpha / 2.0);
  s.significant = alpha > 0.0 && excludes_zero(s.ci_low, s.ci_high);
  s.mean = stats::mean(draws);
  s.sd = draws.size() > 1 ? std::sqrt(stats::variance(draws)) : 0.0;
  return s;
}

std::vector<FeatureSummary> summarize(const DrawArray& draws,
                                      const std::vector<std::pair<std::string, int>>& feature_index, double alpha) {
  std::vector<FeatureSummary> out;
  out.reserve(feature_index.size());
  for (const auto& [id, param] : feature_index) out.push_back(summarize_draws(id, draws.pooled(param), alpha));
  return out;
}

}  // namespace dipper
