#include "dipper/model.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <json.hpp>

#include "dipper/rng.hpp"

namespace dipper {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// log(logistic(z)) and log(1 - logistic(z)) without cancellation.
double log_logistic(double z) { return -softplus(-z); }
double log1m_logistic(double z) { return -softplus(z); }

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Derivative of the check function; the kink at u = 0 takes nu - 1/2.
double check_slope(double u, double nu) {
  if (u > 0.0) return nu;
  if (u < 0.0) return nu - 1.0;
  return nu - 0.5;
}

double check_loss(double u, double nu) { return u * (nu - (u < 0.0 ? 1.0 : 0.0)); }

}  // namespace

// ---------------------------------------------------------------------------
// PriorConfig

void PriorConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(name) + " must be positive");
  };
  positive(tau0_scale, "tau0_scale");
  positive(nu_scale, "nu_scale");
  positive(beta_shape_a, "beta_shape_a");
  positive(beta_shape_b, "beta_shape_b");
  positive(alpha_sd, "alpha_sd");
  positive(reads_prior_sd, "reads_prior_sd");
  positive(covariate_sd, "covariate_sd");
  positive(sigma_shape, "sigma_shape");
  positive(sigma_rate, "sigma_rate");
  if (!(nu_location > 0.0 && nu_location < 1.0)) throw std::invalid_argument("nu_location must lie in (0, 1)");
  if (!std::isfinite(reads_prior_mean)) throw std::invalid_argument("reads_prior_mean must be finite");
}

const std::vector<std::string>& PriorConfig::preset_names() {
  static const std::vector<std::string> names{"default", "symm", "skewed", "wide", "narrow"};
  return names;
}

PriorConfig PriorConfig::preset(std::string_view name) {
  PriorConfig c;
  if (name == "default") return c;
  if (name == "symm") {
    c.nu_mode = NuMode::fixed_symmetric;
  } else if (name == "skewed") {
    c.nu_mode = NuMode::beta_hyperprior;
    c.beta_shape_a = 5.0;
    c.beta_shape_b = 5.0;
  } else if (name == "wide") {
    c.tau0_scale = 2.0;
  } else if (name == "narrow") {
    c.tau0_scale = 0.5;
  } else {
    throw std::invalid_argument("unknown prior preset '" + std::string(name) + "'");
  }
  return c;
}

std::string to_string(NuMode mode) {
  switch (mode) {
    case NuMode::free: return "free";
    case NuMode::fixed_symmetric: return "fixed_symmetric";
    case NuMode::beta_hyperprior: return "beta_hyperprior";
  }
  return "free";
}

NuMode nu_mode_from_string(std::string_view name) {
  if (name == "free") return NuMode::free;
  if (name == "fixed_symmetric") return NuMode::fixed_symmetric;
  if (name == "beta_hyperprior") return NuMode::beta_hyperprior;
  throw std::invalid_argument("unknown nu_mode '" + std::string(name) + "'");
}

std::string to_string(LikelihoodFamily family) {
  return family == LikelihoodFamily::gaussian ? "gaussian" : "bernoulli_logit";
}

std::string to_string(Parameterization p) {
  switch (p) {
    case Parameterization::centered: return "centered";
    case Parameterization::noncentered: return "noncentered";
    case Parameterization::mixture: return "mixture";
  }
  return "mixture";
}

Parameterization parameterization_from_string(std::string_view name) {
  if (name == "centered") return Parameterization::centered;
  if (name == "noncentered") return Parameterization::noncentered;
  if (name == "mixture") return Parameterization::mixture;
  throw std::invalid_argument("unknown parameterization '" + std::string(name) + "'");
}

AlMixtureCoefficients al_mixture_coefficients(double nu) {
  const double d = nu * (1.0 - nu);
  return {(1.0 - 2.0 * nu) / d, std::sqrt(2.0 / d)};
}

std::string prior_config_to_json(const PriorConfig& c) {
  nlohmann::ordered_json j;
  j["tau0_scale"] = c.tau0_scale;
  j["nu_mode"] = to_string(c.nu_mode);
  j["nu_location"] = c.nu_location;
  j["nu_scale"] = c.nu_scale;
  j["beta_shape"] = {c.beta_shape_a, c.beta_shape_b};
  j["alpha_sd"] = c.alpha_sd;
  j["reads_prior_mean"] = c.reads_prior_mean;
  j["reads_prior_sd"] = c.reads_prior_sd;
  j["covariate_sd"] = c.covariate_sd;
  j["sigma_gamma"] = {c.sigma_shape, c.sigma_rate};
  return j.dump(2);
}

PriorConfig prior_config_from_json(std::string_view text) {
  const auto j = nlohmann::json::parse(text);
  PriorConfig c = PriorConfig::preset(j.value("preset", std::string("default")));
  c.tau0_scale = j.value("tau0_scale", c.tau0_scale);
  if (j.contains("nu_mode")) c.nu_mode = nu_mode_from_string(j["nu_mode"].get<std::string>());
  c.nu_location = j.value("nu_location", c.nu_location);
  c.nu_scale = j.value("nu_scale", c.nu_scale);
  if (j.contains("beta_shape")) {
    c.beta_shape_a = j["beta_shape"].at(0).get<double>();
    c.beta_shape_b = j["beta_shape"].at(1).get<double>();
  }
  c.alpha_sd = j.value("alpha_sd", c.alpha_sd);
  c.reads_prior_mean = j.value("reads_prior_mean", c.reads_prior_mean);
  c.reads_prior_sd = j.value("reads_prior_sd", c.reads_prior_sd);
  c.covariate_sd = j.value("covariate_sd", c.covariate_sd);
  if (j.contains("sigma_gamma")) {
    c.sigma_shape = j["sigma_gamma"].at(0).get<double>();
    c.sigma_rate = j["sigma_gamma"].at(1).get<double>();
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Likelihood kinds

LikelihoodKind LikelihoodKind::bernoulli(const AnalysisInput& input) {
  return {LikelihoodFamily::bernoulli_logit, input.presence};
}

LikelihoodKind LikelihoodKind::gaussian(const AnalysisInput& input, double pseudocount_fraction) {
  if (!(pseudocount_fraction > 0.0)) throw std::invalid_argument("pseudocount_fraction must be positive");
  const auto& rel = input.rel_abundance;
  if (rel.rows() != static_cast<Eigen::Index>(input.n_samples()) ||
      rel.cols() != static_cast<Eigen::Index>(input.n_features()))
    throw std::invalid_argument("analysis input carries no relative abundances");
  Eigen::MatrixXd y(rel.rows(), rel.cols());
  for (Eigen::Index k = 0; k < rel.cols(); ++k) {
    double smallest = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < rel.rows(); ++i)
      if (rel(i, k) > 0.0) smallest = std::min(smallest, rel(i, k));
    if (!std::isfinite(smallest)) smallest = 1.0;
    const double pseudo = pseudocount_fraction * smallest;
    Eigen::VectorXd col = (rel.col(k).array() + pseudo).log();
    const double mean = col.mean();
    const double sd = std::sqrt((col.array() - mean).square().sum() / static_cast<double>(col.size() - 1));
    y.col(k) = sd > 0.0 ? Eigen::VectorXd((col.array() - mean) / sd) : Eigen::VectorXd(col.array() - mean);
  }
  return {LikelihoodFamily::gaussian, std::move(y)};
}

// ---------------------------------------------------------------------------
// Layout

ParameterLayout::ParameterLayout(int k, int m, const PriorConfig& prior, LikelihoodFamily family,
                                 Parameterization p)
    : n_features(k),
      n_covariates(m),
      nu_free(prior.nu_mode != NuMode::fixed_symmetric),
      gaussian(family == LikelihoodFamily::gaussian),
      parameterization(p) {}

std::vector<std::string> ParameterLayout::names(const std::vector<std::string>& feature_ids,
                                                const std::vector<std::string>& covariate_names) const {
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(size()));
  out.emplace_back("tau0");
  if (nu_free) out.emplace_back("nu0");
  for (int j = 0; j < n_features; ++j) {
    const auto& f = feature_ids.at(static_cast<std::size_t>(j));
    out.push_back("alpha[" + f + "]");
    out.push_back("beta[" + f + "]");
    out.push_back("beta_reads[" + f + "]");
    for (int m = 0; m < n_covariates; ++m)
      out.push_back("beta_cov[" + f + "," + covariate_names.at(static_cast<std::size_t>(m)) + "]");
    if (gaussian) out.push_back("sigma[" + f + "]");
    if (mixture()) out.push_back("w[" + f + "]");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Densities

double al_logpdf(double x, double mu, double tau, double nu) {
  if (!(tau > 0.0)) throw std::domain_error("al_logpdf: tau must be positive");
  if (!(nu > 0.0 && nu < 1.0)) throw std::domain_error("al_logpdf: nu must lie in (0, 1)");
  const double u = (x - mu) / tau;
  return std::log(nu) + std::log1p(-nu) - std::log(tau) - check_loss(u, nu);
}

double half_normal_logpdf(double x, double scale) {
  if (x < 0.0) return kNegInf;
  return std::log(2.0) - kHalfLog2Pi - std::log(scale) - 0.5 * (x / scale) * (x / scale);
}

double normal_logpdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -kHalfLog2Pi - std::log(sd) - 0.5 * z * z;
}

double truncated_laplace_logpdf(double x, double location, double scale) {
  if (!(x > 0.0 && x < 1.0)) return kNegInf;
  const double mass = 1.0 - 0.5 * std::exp(-location / scale) - 0.5 * std::exp(-(1.0 - location) / scale);
  return -std::log(2.0 * scale) - std::abs(x - location) / scale - std::log(mass);
}

double beta_logpdf(double x, double a, double b) {
  if (!(x > 0.0 && x < 1.0)) return kNegInf;
  return (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) + std::lgamma(a + b) - std::lgamma(a) -
         std::lgamma(b);
}

double gamma_logpdf(double x, double shape, double rate) {
  if (!(x > 0.0)) return kNegInf;
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

double log_prior(const ParameterVector& p, const PriorConfig& c) {
  double lp = half_normal_logpdf(p.tau0, c.tau0_scale);
  switch (c.nu_mode) {
    case NuMode::free: lp += truncated_laplace_logpdf(p.nu0, c.nu_location, c.nu_scale); break;
    case NuMode::beta_hyperprior: lp += beta_logpdf(p.nu0, c.beta_shape_a, c.beta_shape_b); break;
    case NuMode::fixed_symmetric: break;
  }
  const double nu = c.nu_mode == NuMode::fixed_symmetric ? 0.5 : p.nu0;
  for (int j = 0; j < p.n_features(); ++j) {
    lp += al_logpdf(p.beta[j], 0.0, p.tau0, nu);
    lp += normal_logpdf(p.alpha[j], 0.0, c.alpha_sd);
    lp += normal_logpdf(p.beta_reads[j], c.reads_prior_mean, c.reads_prior_sd);
    for (Eigen::Index m = 0; m < p.beta_cov.cols(); ++m) lp += normal_logpdf(p.beta_cov(j, m), 0.0, c.covariate_sd);
  }
  for (Eigen::Index j = 0; j < p.sigma.size(); ++j) lp += gamma_logpdf(p.sigma[j], c.sigma_shape, c.sigma_rate);
  return lp;
}

double log_likelihood(const ParameterVector& p, const AnalysisInput& input, const LikelihoodKind& lik) {
  const auto n = static_cast<Eigen::Index>(input.n_samples());
  const auto k = static_cast<Eigen::Index>(input.n_features());
  if (lik.response.rows() != n || lik.response.cols() != k || p.n_features() != k)
    throw std::invalid_argument("log_likelihood: dimension mismatch");
  const bool gaussian = lik.kind == LikelihoodFamily::gaussian;
  double ll = 0.0;
  for (Eigen::Index j = 0; j < k; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double eta = p.alpha[j] + p.beta[j] * input.group[static_cast<std::size_t>(i)] +
                   p.beta_reads[j] * input.log_reads_centered[i];
      for (Eigen::Index m = 0; m < input.covariates_std.cols(); ++m) eta += p.beta_cov(j, m) * input.covariates_std(i, m);
      const double y = lik.response(i, j);
      ll += gaussian ? normal_logpdf(y, eta, p.sigma[j]) : y * eta - softplus(eta);
    }
  }
  return ll;
}

// ---------------------------------------------------------------------------
// Transforms

ParameterVector transform_params(std::span<const double> z, const ParameterLayout& L) {
  if (static_cast<int>(z.size()) != L.size()) throw std::invalid_argument("transform_params: length mismatch");
  ParameterVector p;
  const int k = L.n_features;
  p.tau0 = std::exp(z[0]);
  p.nu0 = L.nu_free ? logistic(z[1]) : 0.5;
  p.alpha.resize(k);
  p.beta.resize(k);
  p.beta_reads.resize(k);
  p.beta_cov.resize(k, L.n_covariates);
  if (L.gaussian) p.sigma.resize(k);
  const double beta_scale = L.parameterization == Parameterization::noncentered ? p.tau0 : 1.0;
  const auto mix = al_mixture_coefficients(p.nu0);
  for (int j = 0; j < k; ++j) {
    p.alpha[j] = z[static_cast<std::size_t>(L.alpha_index(j))];
    const double raw = z[static_cast<std::size_t>(L.beta_index(j))];
    if (L.mixture()) {
      const double w = std::exp(z[static_cast<std::size_t>(L.mixing_index(j))]);
      p.beta[j] = p.tau0 * (mix.theta * w + mix.kappa * std::sqrt(w) * raw);
    } else {
      p.beta[j] = beta_scale * raw;
    }
    p.beta_reads[j] = z[static_cast<std::size_t>(L.reads_index(j))];
    for (int m = 0; m < L.n_covariates; ++m) p.beta_cov(j, m) = z[static_cast<std::size_t>(L.covariate_index(j, m))];
    if (L.gaussian) p.sigma[j] = std::exp(z[static_cast<std::size_t>(L.sigma_index(j))]);
  }
  return p;
}

std::vector<double> inverse_transform(const ParameterVector& p, const ParameterLayout& L) {
  std::vector<double> z(static_cast<std::size_t>(L.size()));
  z[0] = std::log(p.tau0);
  if (L.nu_free) z[1] = std::log(p.nu0) - std::log1p(-p.nu0);
  const double beta_scale = L.parameterization == Parameterization::noncentered ? p.tau0 : 1.0;
  const auto mix = al_mixture_coefficients(L.nu_free ? p.nu0 : 0.5);
  for (int j = 0; j < L.n_features; ++j) {
    z[static_cast<std::size_t>(L.alpha_index(j))] = p.alpha[j];
    if (L.mixture()) {
      z[static_cast<std::size_t>(L.beta_index(j))] = (p.beta[j] / p.tau0 - mix.theta) / mix.kappa;
      z[static_cast<std::size_t>(L.mixing_index(j))] = 0.0;
    } else {
      z[static_cast<std::size_t>(L.beta_index(j))] = p.beta[j] / beta_scale;
    }
    z[static_cast<std::size_t>(L.reads_index(j))] = p.beta_reads[j];
    for (int m = 0; m < L.n_covariates; ++m) z[static_cast<std::size_t>(L.covariate_index(j, m))] = p.beta_cov(j, m);
    if (L.gaussian) z[static_cast<std::size_t>(L.sigma_index(j))] = std::log(p.sigma[j]);
  }
  return z;
}

double log_jacobian(std::span<const double> z, const ParameterLayout& L) {
  double lj = z[0];
  if (L.parameterization == Parameterization::noncentered) lj += L.n_features * z[0];
  if (L.nu_free) lj += log_logistic(z[1]) + log1m_logistic(z[1]);
  for (int j = 0; j < L.n_features; ++j) {
    if (L.gaussian) lj += z[static_cast<std::size_t>(L.sigma_index(j))];
    if (L.mixture()) lj += z[static_cast<std::size_t>(L.mixing_index(j))];
  }
  return lj;
}

std::vector<double> constrained_flat(std::span<const double> z, const ParameterLayout& L) {
  std::vector<double> out(z.begin(), z.end());
  const double tau = std::exp(z[0]);
  out[0] = tau;
  if (L.nu_free) out[1] = logistic(z[1]);
  const auto mix = al_mixture_coefficients(L.nu_free ? out[1] : 0.5);
  for (int j = 0; j < L.n_features; ++j) {
    const auto b = static_cast<std::size_t>(L.beta_index(j));
    if (L.parameterization == Parameterization::noncentered) out[b] *= tau;
    if (L.mixture()) {
      const auto m = static_cast<std::size_t>(L.mixing_index(j));
      const double w = std::exp(z[m]);
      out[b] = tau * (mix.theta * w + mix.kappa * std::sqrt(w) * z[b]);
      out[m] = w;
    }
    if (L.gaussian) {
      auto s = static_cast<std::size_t>(L.sigma_index(j));
      out[s] = std::exp(z[s]);
    }
  }
  return out;
}

std::vector<double> init_params(std::uint64_t seed, int chain, const ParameterLayout& layout) {
  auto rng = make_engine(seed, {0x696e6974ULL, static_cast<std::uint64_t>(chain)});
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  std::vector<double> z(static_cast<std::size_t>(layout.size()));
  for (auto& v : z) v = unif(rng);
  return z;
}

// ---------------------------------------------------------------------------
// Joint density

DipperModel::DipperModel(const AnalysisInput& input, LikelihoodKind lik, PriorConfig config,
                         Parameterization parameterization)
    : input_(input),
      lik_(std::move(lik)),
      prior_(config),
      layout_(static_cast<int>(input.n_features()), static_cast<int>(input.n_covariates()), config, lik_.kind,
              parameterization),
      design_(input.design_matrix()) {
  prior_.validate();
  if (lik_.response.rows() != design_.rows() || lik_.response.cols() != static_cast<Eigen::Index>(input.n_features()))
    throw std::invalid_argument("response dimensions do not match the analysis input");
}

double DipperModel::log_density(std::span<const double> z) const {
  std::vector<double> grad(z.size());
  return log_density_gradient(z, grad);
}

namespace {

struct GradientWorkspace {
  Eigen::MatrixXd coef;
  Eigen::MatrixXd eta;
  Eigen::MatrixXd resid;
  Eigen::MatrixXd coef_grad;
  Eigen::ArrayXXd e;
  Eigen::ArrayXXd one_plus;
  Eigen::ArrayXXd scratch;
  Eigen::VectorXd w;
};

}  // namespace

double DipperModel::log_density_gradient(std::span<const double> z, std::span<double> grad) const {
  const auto& L = layout_;
  const auto dim = static_cast<std::size_t>(L.size());
  if (z.size() != dim || grad.size() != dim) throw std::invalid_argument("log_density_gradient: length mismatch");
  std::fill(grad.begin(), grad.end(), 0.0);
  for (double v : z)
    if (!std::isfinite(v)) return kNegInf;

  const int k = L.n_features;
  const int p_coef = L.n_coefficients();
  const int block = L.block_size();
  const auto param = L.parameterization;
  const auto& c = prior_;

  const double z_tau = z[0];
  const double tau = std::exp(z_tau);
  const double nu = L.nu_free ? logistic(z[1]) : 0.5;
  const auto mix = al_mixture_coefficients(nu);

  // Per-thread scratch buffers: reusing them avoids re-faulting fresh pages
  // for every evaluation, which otherwise dominates the cost.
  thread_local GradientWorkspace ws;

  // Coefficients as a P x K matrix; column j is feature j. Row 1 holds the
  // sampler's effect coordinate until it is mapped to beta_j below.
  Eigen::Map<const Eigen::MatrixXd, 0, Eigen::OuterStride<>> raw(z.data() + L.n_hyper(), p_coef, k,
                                                                 Eigen::OuterStride<>(block));
  auto& coef = ws.coef;
  coef = raw;
  if (param == Parameterization::noncentered) {
    coef.row(1) *= tau;
  } else if (param == Parameterization::mixture) {
    ws.w.resize(k);
    for (int j = 0; j < k; ++j) {
      const double w = std::exp(z[static_cast<std::size_t>(L.mixing_index(j))]);
      ws.w[j] = w;
      coef(1, j) = tau * (mix.theta * w + mix.kappa * std::sqrt(w) * raw(1, j));
    }
  }

  auto& eta = ws.eta;
  eta.noalias() = design_ * coef;  // N x K
  const auto& y = lik_.response;
  auto& resid = ws.resid;  // d loglik / d eta
  double lp = 0.0;
  Eigen::VectorXd sigma_grad;

  if (lik_.kind == LikelihoodFamily::bernoulli_logit) {
    // softplus(eta) = max(eta, 0) + log(1 + exp(-|eta|)); the log argument
    // lies in [1, 2], so plain log is accurate and vectorizes.
    ws.e = (-eta.array().abs()).exp();
    ws.one_plus = 1.0 + ws.e;
    ws.scratch = ws.one_plus.log();
    lp += (y.array() * eta.array() - eta.array().max(0.0)).sum() - ws.scratch.sum();
    ws.one_plus = ws.one_plus.inverse();
    resid = (y.array() - (eta.array() >= 0.0).select(ws.one_plus, ws.e * ws.one_plus)).matrix();
  } else {
    const double n = static_cast<double>(design_.rows());
    Eigen::ArrayXd z_sigma(k);
    for (int j = 0; j < k; ++j) z_sigma[j] = z[static_cast<std::size_t>(L.sigma_index(j))];
    const Eigen::ArrayXd inv_var = (-2.0 * z_sigma).exp();
    ws.scratch = y.array() - eta.array();
    const Eigen::ArrayXd ss = ws.scratch.square().colwise().sum().transpose();
    lp += (-n * (kHalfLog2Pi + z_sigma) - 0.5 * ss * inv_var).sum();
    resid = (ws.scratch.rowwise() * inv_var.transpose()).matrix();
    sigma_grad = (-n + ss * inv_var).matrix();
  }
  auto& coef_grad = ws.coef_grad;
  coef_grad.noalias() = design_.transpose() * resid;  // P x K

  // Hyperpriors.
  lp += half_normal_logpdf(tau, c.tau0_scale);
  double g_tau = -tau / (c.tau0_scale * c.tau0_scale);  // d/d tau0
  double g_nu = 0.0;                                    // d/d nu0
  if (c.nu_mode == NuMode::free) {
    lp += truncated_laplace_logpdf(nu, c.nu_location, c.nu_scale);
    const double d = nu - c.nu_location;
    g_nu += d > 0.0 ? -1.0 / c.nu_scale : (d < 0.0 ? 1.0 / c.nu_scale : 0.0);
  } else if (c.nu_mode == NuMode::beta_hyperprior) {
    lp += beta_logpdf(nu, c.beta_shape_a, c.beta_shape_b);
    g_nu += (c.beta_shape_a - 1.0) / nu - (c.beta_shape_b - 1.0) / (1.0 - nu);
  }

  const double log_al_norm = std::log(nu) + std::log1p(-nu) - std::log(tau);
  const double inv_a2 = 1.0 / (c.alpha_sd * c.alpha_sd);
  const double inv_r2 = 1.0 / (c.reads_prior_sd * c.reads_prior_sd);
  const double inv_c2 = 1.0 / (c.covariate_sd * c.covariate_sd);
  const double norm_alpha = -kHalfLog2Pi - std::log(c.alpha_sd);
  const double norm_reads = -kHalfLog2Pi - std::log(c.reads_prior_sd);
  const double norm_cov = -kHalfLog2Pi - std::log(c.covariate_sd);
  // Derivatives of the mixture coefficients with respect to nu.
  const double dd = 1.0 - 2.0 * nu;
  const double dnu = nu * (1.0 - nu);
  const double dtheta = (-2.0 * dnu - dd * dd) / (dnu * dnu);
  const double dkappa = -mix.kappa * dd / (2.0 * dnu);
  double g_ztau_direct = 0.0;  // contributions already on the z_tau scale

  for (int j = 0; j < k; ++j) {
    const auto base = static_cast<std::size_t>(L.block_start(j));
    const double alpha = coef(0, j);
    const double beta = coef(1, j);
    const double reads = coef(2, j);
    const double g_beta_lik = coef_grad(1, j);

    switch (param) {
      case Parameterization::centered:
      case Parameterization::noncentered: {
        const double u = beta / tau;
        lp += log_al_norm - check_loss(u, nu);
        const double slope = check_slope(u, nu);
        const double g_beta = g_beta_lik - slope / tau;
        g_tau += (-1.0 + u * slope) / tau;
        g_nu += (1.0 - 2.0 * nu) / (nu * (1.0 - nu)) - u;
        if (param == Parameterization::noncentered) {
          grad[base + 1] = g_beta * tau;
          g_ztau_direct += g_beta * beta;  // d beta / d z_tau = beta
        } else {
          grad[base + 1] = g_beta;
        }
        break;
      }
      case Parameterization::mixture: {
        const double zj = raw(1, j);
        const auto m_idx = static_cast<std::size_t>(L.mixing_index(j));
        const double w = ws.w[j];
        const double sw = std::sqrt(w);
        lp += -kHalfLog2Pi - 0.5 * zj * zj + z[m_idx] - w;
        grad[base + 1] = g_beta_lik * tau * mix.kappa * sw - zj;
        grad[m_idx] = g_beta_lik * tau * (mix.theta * w + 0.5 * mix.kappa * sw * zj) + 1.0 - w;
        g_ztau_direct += g_beta_lik * beta;
        g_nu += g_beta_lik * tau * (dtheta * w + dkappa * sw * zj);
        break;
      }
    }

    lp += norm_alpha - 0.5 * alpha * alpha * inv_a2;
    grad[base] = coef_grad(0, j) - alpha * inv_a2;

    const double dr = reads - c.reads_prior_mean;
    lp += norm_reads - 0.5 * dr * dr * inv_r2;
    grad[base + 2] = coef_grad(2, j) - dr * inv_r2;

    for (int m = 0; m < L.n_covariates; ++m) {
      const double b = coef(3 + m, j);
      lp += norm_cov - 0.5 * b * b * inv_c2;
      grad[base + 3 + static_cast<std::size_t>(m)] = coef_grad(3 + m, j) - b * inv_c2;
    }

    if (L.gaussian) {
      const auto s_idx = static_cast<std::size_t>(L.sigma_index(j));
      const double sigma = std::exp(z[s_idx]);
      lp += gamma_logpdf(sigma, c.sigma_shape, c.sigma_rate) + z[s_idx];
      grad[s_idx] = sigma_grad[j] + (c.sigma_shape - 1.0) - c.sigma_rate * sigma + 1.0;
    }
  }

  // Jacobians of tau0 = exp(z) (and beta = tau0 b), nu0 = logistic(z).
  const double jac_tau = 1.0 + (param == Parameterization::noncentered ? static_cast<double>(k) : 0.0);
  lp += jac_tau * z_tau;
  grad[0] = g_tau * tau + g_ztau_direct + jac_tau;
  if (L.nu_free) {
    lp += log_logistic(z[1]) + log1m_logistic(z[1]);
    grad[1] = g_nu * dnu + dd;
  }

  if (!std::isfinite(lp)) {
    std::fill(grad.begin(), grad.end(), 0.0);
    return kNegInf;
  }
  for (double g : grad)
    if (!std::isfinite(g)) {
      std::fill(grad.begin(), grad.end(), 0.0);
      return kNegInf;
    }
  return lp;
}

}  // namespace dipper
