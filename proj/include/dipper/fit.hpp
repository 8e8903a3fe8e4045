#pragma once

#include <string>
#include <vector>

#include "dipper/data.hpp"
#include "dipper/model.hpp"
#include "dipper/nuts.hpp"
#include "dipper/summary.hpp"

namespace dipper {

/// R-hat threshold and divergence rule for declaring a fit converged.
inline constexpr double kRhatThreshold = 1.02;

struct FitOptions {
  LikelihoodFamily family = LikelihoodFamily::bernoulli_logit;
  PriorConfig prior;
  SamplerConfig sampler;
  Parameterization parameterization = Parameterization::mixture;
  double pseudocount_fraction = 0.5;  // Gaussian variant only
};

/// Posterior of the shrinkage model on the constrained scale.
struct DipperFit {
  ParameterLayout layout;
  std::vector<std::string> feature_ids;
  std::vector<std::string> parameter_names;
  DrawArray draws;  // constrained values, layout order
  std::vector<std::uint8_t> divergent;
  int divergence_count = 0;
  DiagnosticSeries rhat;
  DiagnosticSeries ess;
  std::vector<ChainStats> chain_stats;

  /// Diagnostics over the effects of interest (beta_j).
  double max_rhat_beta() const;
  double min_ess_beta() const;
  /// R-hat < 1.02 for every beta_j and no divergent transitions.
  bool converged() const;

  std::vector<double> beta_draws(int feature) const;
  std::vector<FeatureSummary> summaries(double alpha = 0.10) const;
};

DipperFit fit_dipper(const AnalysisInput& input, const FitOptions& options);

}  // namespace dipper
