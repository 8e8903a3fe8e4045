#include "dipper/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dipper/diagnostics.hpp"

namespace dipper {

double DipperFit::max_rhat_beta() const {
  double worst = 0.0;
  for (int j = 0; j < layout.n_features; ++j) {
    const double r = rhat.value[static_cast<std::size_t>(layout.beta_index(j))];
    if (std::isnan(r)) return NAN;
    worst = std::max(worst, r);
  }
  return worst;
}

double DipperFit::min_ess_beta() const {
  double best = std::numeric_limits<double>::infinity();
  for (int j = 0; j < layout.n_features; ++j) {
    const double e = ess.value[static_cast<std::size_t>(layout.beta_index(j))];
    if (std::isnan(e)) return NAN;
    best = std::min(best, e);
  }
  return best;
}

bool DipperFit::converged() const {
  const double r = max_rhat_beta();
  return !std::isnan(r) && r < kRhatThreshold && divergence_count == 0;
}

std::vector<double> DipperFit::beta_draws(int feature) const { return draws.pooled(layout.beta_index(feature)); }

std::vector<FeatureSummary> DipperFit::summaries(double alpha) const {
  std::vector<std::pair<std::string, int>> index;
  for (int j = 0; j < layout.n_features; ++j)
    index.emplace_back(feature_ids[static_cast<std::size_t>(j)], layout.beta_index(j));
  return summarize(draws, index, alpha);
}

DipperFit fit_dipper(const AnalysisInput& input, const FitOptions& options) {
  LikelihoodKind lik = options.family == LikelihoodFamily::gaussian
                           ? LikelihoodKind::gaussian(input, options.pseudocount_fraction)
                           : LikelihoodKind::bernoulli(input);
  const DipperModel model(input, std::move(lik), options.prior, options.parameterization);
  const auto& layout = model.layout();

  std::vector<std::vector<double>> inits;
  for (int c = 0; c < options.sampler.chains; ++c) inits.push_back(init_params(options.sampler.seed, c, layout));

  const LogDensityGradient target = [&model](std::span<const double> z, std::span<double> g) {
    return model.log_density_gradient(z, g);
  };
  PosteriorDraws raw = run_nuts(target, layout.size(), options.sampler, inits);

  DipperFit fit;
  fit.layout = layout;
  fit.feature_ids = input.feature_ids;
  fit.parameter_names = layout.names(input.feature_ids, input.covariate_names);
  fit.draws = DrawArray(raw.draws.chains(), raw.draws.draws(), raw.draws.params());
  for (int c = 0; c < raw.draws.chains(); ++c)
    for (int d = 0; d < raw.draws.draws(); ++d) {
      const auto values = constrained_flat(raw.draws.row(c, d), layout);
      std::copy(values.begin(), values.end(), fit.draws.row(c, d).begin());
    }
  fit.divergent = std::move(raw.divergent);
  fit.divergence_count = raw.divergence_count;
  fit.chain_stats = std::move(raw.chain_stats);
  fit.rhat = split_rhat(fit.draws);
  fit.ess = ess_bulk(fit.draws);
  return fit;
}

}  // namespace dipper
