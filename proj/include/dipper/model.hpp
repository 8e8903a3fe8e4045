#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "dipper/data.hpp"

namespace dipper {

/// How the skewness hyperparameter nu0 is treated.
enum class NuMode {
  free,             ///< Laplace(location, scale) hyperprior truncated to (0, 1)
  fixed_symmetric,  ///< nu0 pinned at 0.5, not sampled
  beta_hyperprior,  ///< Beta(a, b) hyperprior
};

/// Hyperparameters of the shrinkage model. Defaults are the standard
/// specification; `preset()` returns the named alternatives.
struct PriorConfig {
  double tau0_scale = 1.0;  // half-normal scale of tau0
  NuMode nu_mode = NuMode::free;
  double nu_location = 0.50;
  double nu_scale = 0.05;
  double beta_shape_a = 5.0;
  double beta_shape_b = 5.0;
  double alpha_sd = 5.0;
  double reads_prior_mean = 2.0;
  double reads_prior_sd = 2.0;
  double covariate_sd = 1.0;
  // Gamma(shape, rate) prior on the residual sd of the Gaussian variant.
  double sigma_shape = 1.0;
  double sigma_rate = 1.0;

  void validate() const;

  /// One of: default, symm, skewed, wide, narrow.
  static PriorConfig preset(std::string_view name);
  static const std::vector<std::string>& preset_names();
};

std::string to_string(NuMode mode);
NuMode nu_mode_from_string(std::string_view name);
std::string prior_config_to_json(const PriorConfig& config);
PriorConfig prior_config_from_json(std::string_view json);

enum class LikelihoodFamily { bernoulli_logit, gaussian };

std::string to_string(LikelihoodFamily family);

/// Observation model and its response matrix (N x K).
struct LikelihoodKind {
  LikelihoodFamily kind = LikelihoodFamily::bernoulli_logit;
  Eigen::MatrixXd response;

  static LikelihoodKind bernoulli(const AnalysisInput& input);
  /// Per-feature log(relative abundance + pseudocount), standardized to mean 0
  /// and sd 1. The pseudocount is `pseudocount_fraction` times the smallest
  /// non-zero relative abundance of the feature.
  static LikelihoodKind gaussian(const AnalysisInput& input, double pseudocount_fraction = 0.5);
};

/// How the sampler sees each effect beta_j.
///
/// centered:    beta_j itself.
/// noncentered: b_j = beta_j / tau0.
/// mixture:     the normal / exponential scale-mixture form of the asymmetric
///              Laplace, beta_j = tau0 (theta w_j + kappa sqrt(w_j) z_j) with
///              z_j ~ N(0, 1) and w_j ~ Exp(1). The marginal prior of beta_j is
///              unchanged, but the joint density is smooth, which the
///              leapfrog integrator handles far better than the Laplace kink.
enum class Parameterization { centered, noncentered, mixture };

/// theta(nu) = (1 - 2 nu) / (nu (1 - nu)) and kappa(nu) = sqrt(2 / (nu (1 - nu))).
struct AlMixtureCoefficients {
  double theta;
  double kappa;
};
AlMixtureCoefficients al_mixture_coefficients(double nu);

std::string to_string(Parameterization p);
Parameterization parameterization_from_string(std::string_view name);

/// Fixed layout of the unconstrained parameter vector:
///
///   [z_tau0, (z_nu0), block_0, ..., block_{K-1}]
///   block_j = [alpha_j, beta_j (or b_j / z_j), beta_reads_j, beta_cov_j(0..M-1),
///              (z_sigma_j), (log w_j)]
///
/// z_tau0 = log tau0, z_nu0 = logit nu0, z_sigma_j = log sigma_j. The last
/// slot exists only for the mixture parameterization.
struct ParameterLayout {
  int n_features = 0;
  int n_covariates = 0;
  bool nu_free = true;
  bool gaussian = false;
  Parameterization parameterization = Parameterization::mixture;

  ParameterLayout() = default;
  ParameterLayout(int k, int m, const PriorConfig& prior, LikelihoodFamily family,
                  Parameterization p = Parameterization::mixture);

  int n_hyper() const { return nu_free ? 2 : 1; }
  /// Regression coefficients per feature (intercept, group, reads, covariates).
  int n_coefficients() const { return 3 + n_covariates; }
  bool mixture() const { return parameterization == Parameterization::mixture; }
  int block_size() const { return n_coefficients() + (gaussian ? 1 : 0) + (mixture() ? 1 : 0); }
  int size() const { return n_hyper() + n_features * block_size(); }

  int tau_index() const { return 0; }
  int nu_index() const { return nu_free ? 1 : -1; }
  int block_start(int j) const { return n_hyper() + j * block_size(); }
  int alpha_index(int j) const { return block_start(j); }
  int beta_index(int j) const { return block_start(j) + 1; }
  int reads_index(int j) const { return block_start(j) + 2; }
  int covariate_index(int j, int m) const { return block_start(j) + 3 + m; }
  int sigma_index(int j) const { return gaussian ? block_start(j) + n_coefficients() : -1; }
  int mixing_index(int j) const { return mixture() ? block_start(j) + n_coefficients() + (gaussian ? 1 : 0) : -1; }

  /// Names of the constrained parameters in layout order; the mixing
  /// weights appear as w[feature].
  std::vector<std::string> names(const std::vector<std::string>& feature_ids,
                                 const std::vector<std::string>& covariate_names) const;
};

/// Model parameters on their natural (constrained) scale.
struct ParameterVector {
  double tau0 = 1.0;
  double nu0 = 0.5;
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;
  Eigen::VectorXd beta_reads;
  Eigen::MatrixXd beta_cov;  // K x M
  Eigen::VectorXd sigma;     // Gaussian variant only

  int n_features() const { return static_cast<int>(alpha.size()); }
};

/// Asymmetric Laplace log-density in the quantile (check-function) form:
///   log[nu (1 - nu) / tau] - rho_nu((x - mu) / tau),  rho_nu(u) = u (nu - 1{u < 0}).
/// P(X <= mu) = nu; nu = 0.5 is a Laplace with scale 2 tau.
double al_logpdf(double x, double mu, double tau, double nu);

double half_normal_logpdf(double x, double scale);
double normal_logpdf(double x, double mean, double sd);
/// Laplace(location, scale) truncated to (0, 1) and renormalized.
double truncated_laplace_logpdf(double x, double location, double scale);
double beta_logpdf(double x, double a, double b);
double gamma_logpdf(double x, double shape, double rate);

/// Sum of all prior terms on the constrained scale. The nu0 hyperprior is
/// omitted when nu0 is fixed.
double log_prior(const ParameterVector& params, const PriorConfig& config);

double log_likelihood(const ParameterVector& params, const AnalysisInput& input,
                      const LikelihoodKind& lik);

ParameterVector transform_params(std::span<const double> z, const ParameterLayout& layout);
/// Unconstrained point mapping to `params`. Under the mixture
/// parameterization the map is many-to-one; w_j = 1 is chosen.
std::vector<double> inverse_transform(const ParameterVector& params, const ParameterLayout& layout);
/// log |d constrained / d unconstrained| at z, where the constrained
/// coordinates are (tau0, nu0, beta or w, sigma) and everything else is the
/// identity. For the non-centered form this includes K log tau0.
double log_jacobian(std::span<const double> z, const ParameterLayout& layout);
/// Constrained values flattened in layout order (nu0 present only if free).
std::vector<double> constrained_flat(std::span<const double> z, const ParameterLayout& layout);

/// Uniform(-2, 2) per unconstrained coordinate; chain c uses its own substream.
std::vector<double> init_params(std::uint64_t seed, int chain, const ParameterLayout& layout);

/// Joint log-posterior on the unconstrained scale with its analytic gradient.
class DipperModel {
 public:
  DipperModel(const AnalysisInput& input, LikelihoodKind lik, PriorConfig config,
              Parameterization parameterization = Parameterization::mixture);

  const ParameterLayout& layout() const { return layout_; }
  int dimension() const { return layout_.size(); }
  const PriorConfig& prior() const { return prior_; }
  const LikelihoodKind& likelihood() const { return lik_; }
  const AnalysisInput& input() const { return input_; }

  /// Returns -inf (and a zero gradient) for non-finite input or overflow.
  double log_density_gradient(std::span<const double> z, std::span<double> grad) const;
  double log_density(std::span<const double> z) const;

 private:
  AnalysisInput input_;
  LikelihoodKind lik_;
  PriorConfig prior_;
  ParameterLayout layout_;
  Eigen::MatrixXd design_;  // N x P
};

}  // namespace dipper
