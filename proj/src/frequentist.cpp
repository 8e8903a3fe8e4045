#include "dipper/frequentist.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dipper/stats.hpp"

namespace dipper {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kIrlsTol = 1e-8;
constexpr int kIrlsMaxIter = 100;
constexpr double kDivergenceStop = 30.0;
constexpr double kFirthTol = 1e-8;
constexpr int kFirthMaxIter = 200;

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

Eigen::VectorXd logistic(const Eigen::VectorXd& eta) {
  Eigen::VectorXd p(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double e = std::exp(-std::abs(eta[i]));
    p[i] = eta[i] >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
  }
  return p;
}

void check_rank(const Eigen::MatrixXd& X) {
  if (X.rows() < X.cols()) throw DesignError("design has fewer rows than columns");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < X.cols())
    throw DesignError("design matrix is rank deficient (rank " + std::to_string(qr.rank()) + " < " +
                      std::to_string(X.cols()) + ")");
}

Eigen::MatrixXd drop_column(const Eigen::MatrixXd& X, int col) {
  Eigen::MatrixXd out(X.rows(), X.cols() - 1);
  for (Eigen::Index c = 0, o = 0; c < X.cols(); ++c)
    if (c != col) out.col(o++) = X.col(c);
  return out;
}

// Information matrix X' W X and its log-determinant; -inf when not SPD.
struct Information {
  Eigen::MatrixXd matrix;
  Eigen::LLT<Eigen::MatrixXd> llt;
  double log_det = kNegInf;
};

Information information(const Eigen::MatrixXd& X, const Eigen::VectorXd& w) {
  Information info;
  info.matrix = X.transpose() * w.asDiagonal() * X;
  info.llt.compute(info.matrix);
  if (info.llt.info() == Eigen::Success) {
    const auto& L = info.llt.matrixL();
    double ld = 0.0;
    for (Eigen::Index i = 0; i < info.matrix.rows(); ++i) ld += 2.0 * std::log(L(i, i));
    info.log_det = ld;
  }
  return info;
}

}  // namespace

double logistic_loglik(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = X * beta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) ll += y[i] * eta[i] - softplus(eta[i]);
  return ll;
}

double firth_penalized_loglik(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd p = logistic(X * beta);
  const Eigen::VectorXd w = p.array() * (1.0 - p.array());
  const auto info = information(X, w);
  return logistic_loglik(y, X, beta) + 0.5 * info.log_det;
}

GlmFit irls_fit(const Eigen::VectorXd& y, const Eigen::MatrixXd& X) {
  if (y.size() != X.rows()) throw std::invalid_argument("irls_fit: y and X disagree in length");
  check_rank(X);
  GlmFit fit;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(X.cols());
  double ll = logistic_loglik(y, X, beta);
  for (int it = 1; it <= kIrlsMaxIter; ++it) {
    fit.iterations = it;
    const Eigen::VectorXd p = logistic(X * beta);
    const Eigen::VectorXd w = p.array() * (1.0 - p.array());
    const Eigen::MatrixXd info = X.transpose() * w.asDiagonal() * X;
    const Eigen::VectorXd score = X.transpose() * (y - p);
    Eigen::VectorXd delta = info.ldlt().solve(score);
    if (!delta.allFinite()) break;
    double ll_new = logistic_loglik(y, X, beta + delta);
    for (int halve = 0; halve < 30 && !(ll_new >= ll - 1e-12); ++halve) {
      delta *= 0.5;
      ll_new = logistic_loglik(y, X, beta + delta);
    }
    beta += delta;
    ll = ll_new;
    if (delta.cwiseAbs().maxCoeff() < kIrlsTol) {
      fit.converged = true;
      break;
    }
    if (beta.cwiseAbs().maxCoeff() > kDivergenceStop) break;
  }
  const Eigen::VectorXd p = logistic(X * beta);
  const Eigen::VectorXd w = p.array() * (1.0 - p.array());
  const Eigen::MatrixXd info = X.transpose() * w.asDiagonal() * X;
  fit.coefficients = beta;
  fit.log_likelihood = ll;
  fit.cov_matrix = info.ldlt().solve(Eigen::MatrixXd::Identity(X.cols(), X.cols()));
  fit.separated = !fit.converged || beta.cwiseAbs().maxCoeff() > kSeparationBound;
  return fit;
}

GlmFit firth_fit(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, std::optional<int> fixed_index,
                 double fixed_value) {
  if (y.size() != X.rows()) throw std::invalid_argument("firth_fit: y and X disagree in length");
  check_rank(X);
  const auto k = X.cols();
  std::vector<Eigen::Index> free_idx;
  for (Eigen::Index c = 0; c < k; ++c)
    if (!fixed_index || c != *fixed_index) free_idx.push_back(c);
  const auto nf = static_cast<Eigen::Index>(free_idx.size());

  GlmFit fit;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
  if (fixed_index) beta[*fixed_index] = fixed_value;
  double pl = firth_penalized_loglik(y, X, beta);

  for (int it = 1; it <= kFirthMaxIter; ++it) {
    fit.iterations = it;
    const Eigen::VectorXd p = logistic(X * beta);
    const Eigen::VectorXd w = p.array() * (1.0 - p.array());
    const auto info = information(X, w);
    if (info.llt.info() != Eigen::Success) break;
    // Hat values of W^1/2 X (X'WX)^-1 X' W^1/2.
    const Eigen::MatrixXd solved = info.llt.solve(X.transpose());  // k x n
    Eigen::VectorXd h(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) h[i] = w[i] * X.row(i).dot(solved.col(i));
    const Eigen::VectorXd modified = y - p + (h.array() * (0.5 - p.array())).matrix();
    const Eigen::VectorXd score = X.transpose() * modified;

    Eigen::VectorXd delta = Eigen::VectorXd::Zero(k);
    if (nf > 0) {
      Eigen::MatrixXd sub(nf, nf);
      Eigen::VectorXd sub_score(nf);
      for (Eigen::Index a = 0; a < nf; ++a) {
        sub_score[a] = score[free_idx[static_cast<std::size_t>(a)]];
        for (Eigen::Index b = 0; b < nf; ++b)
          sub(a, b) = info.matrix(free_idx[static_cast<std::size_t>(a)], free_idx[static_cast<std::size_t>(b)]);
      }
      const Eigen::VectorXd sub_delta = sub.ldlt().solve(sub_score);
      for (Eigen::Index a = 0; a < nf; ++a) delta[free_idx[static_cast<std::size_t>(a)]] = sub_delta[a];
    }
    if (!delta.allFinite()) break;
    // Cap very large steps; the penalized likelihood is concave near the
    // optimum but early iterates can overshoot.
    const double max_step = delta.cwiseAbs().maxCoeff();
    if (max_step > 5.0) delta *= 5.0 / max_step;

    double pl_new = firth_penalized_loglik(y, X, beta + delta);
    for (int halve = 0; halve < 30 && !(pl_new >= pl - 1e-12); ++halve) {
      delta *= 0.5;
      pl_new = firth_penalized_loglik(y, X, beta + delta);
    }
    beta += delta;
    pl = pl_new;
    if (delta.cwiseAbs().maxCoeff() < kFirthTol) {
      fit.converged = true;
      break;
    }
  }
  if (!fit.converged)
    throw ConvergenceError("Firth fit did not converge in " + std::to_string(kFirthMaxIter) + " iterations");

  const Eigen::VectorXd p = logistic(X * beta);
  const Eigen::VectorXd w = p.array() * (1.0 - p.array());
  const auto info = information(X, w);
  fit.coefficients = beta;
  fit.log_likelihood = logistic_loglik(y, X, beta);
  fit.penalized_log_likelihood = fit.log_likelihood + 0.5 * info.log_det;
  fit.cov_matrix = info.llt.solve(Eigen::MatrixXd::Identity(k, k));
  fit.separated = false;
  return fit;
}

std::string to_string(TestMethod method) {
  switch (method) {
    case TestMethod::wald: return "wald";
    case TestMethod::lrt: return "lrt";
    case TestMethod::firth: return "firth";
  }
  return "wald";
}

TestMethod test_method_from_string(std::string_view name) {
  if (name == "wald") return TestMethod::wald;
  if (name == "lrt") return TestMethod::lrt;
  if (name == "firth") return TestMethod::firth;
  throw std::invalid_argument("unknown frequentist method '" + std::string(name) + "'");
}

TestResult wald_test(const GlmFit& fit, int coef, double alpha) {
  TestResult r;
  r.method = TestMethod::wald;
  if (fit.separated) {
    r.note = "separation: no finite estimate";
    return r;
  }
  const double est = fit.coefficients[coef];
  const double var = fit.cov_matrix(coef, coef);
  if (!(var > 0.0) || !std::isfinite(var)) {
    r.note = "singular information matrix";
    return r;
  }
  const double se = std::sqrt(var);
  const double z = stats::normal_quantile(1.0 - alpha / 2.0);
  r.estimate = est;
  r.se = se;
  r.ci_low = est - z * se;
  r.ci_high = est + z * se;
  r.p = std::clamp(2.0 * stats::normal_cdf(-std::abs(est / se)), 0.0, 1.0);
  return r;
}

TestResult lrt_test(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, int coef, double alpha) {
  const GlmFit full = irls_fit(y, X);
  TestResult r = wald_test(full, coef, alpha);
  r.method = TestMethod::lrt;
  const GlmFit reduced = irls_fit(y, drop_column(X, coef));
  if (reduced.separated) {
    r.p.reset();
    r.note = "reduced model separated: no likelihood-ratio p-value";
    return r;
  }
  const double d = std::max(0.0, 2.0 * (full.log_likelihood - reduced.log_likelihood));
  r.p = stats::chi_squared_sf(d, 1.0);
  if (full.separated) r.note = "separation: p-value from the likelihood supremum, no finite estimate";
  return r;
}

namespace {

// Largest / smallest coefficient value whose constrained penalized
// likelihood stays within `drop` of the maximum.
double profile_bound(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, int coef, double est, double se,
                     double pl_max, double drop, double direction) {
  auto deficit = [&](double b) {
    const auto fit = firth_fit(y, X, coef, b);
    return 2.0 * (pl_max - fit.penalized_log_likelihood) - drop;
  };
  double inner = est;
  double step = std::max(se, 0.1);
  double outer = est + direction * step;
  int guard = 0;
  while (deficit(outer) < 0.0) {
    inner = outer;
    step *= 2.0;
    outer = est + direction * step;
    if (++guard > 40) return direction * std::numeric_limits<double>::infinity();
  }
  for (int it = 0; it < 60 && std::abs(outer - inner) > 1e-7; ++it) {
    const double mid = 0.5 * (inner + outer);
    if (deficit(mid) < 0.0)
      inner = mid;
    else
      outer = mid;
  }
  return 0.5 * (inner + outer);
}

}  // namespace

TestResult firth_plrt(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, int coef, double alpha,
                      const FirthOptions& options) {
  TestResult r;
  r.method = TestMethod::firth;
  const GlmFit full = firth_fit(y, X);
  const GlmFit restricted = firth_fit(y, X, coef, 0.0);
  const double est = full.coefficients[coef];
  const double se = std::sqrt(full.cov_matrix(coef, coef));
  r.estimate = est;
  r.se = se;
  const double d = std::max(0.0, 2.0 * (full.penalized_log_likelihood - restricted.penalized_log_likelihood));
  r.p = stats::chi_squared_sf(d, 1.0);
  if (options.profile_ci) {
    const double drop = stats::chi_squared_quantile(1.0 - alpha, 1.0);
    r.ci_low = profile_bound(y, X, coef, est, se, full.penalized_log_likelihood, drop, -1.0);
    r.ci_high = profile_bound(y, X, coef, est, se, full.penalized_log_likelihood, drop, 1.0);
  } else {
    const double z = stats::normal_quantile(1.0 - alpha / 2.0);
    r.ci_low = est - z * se;
    r.ci_high = est + z * se;
  }
  return r;
}

std::vector<double> bh_adjust(std::span<const double> p) {
  const std::size_t m = p.size();
  for (double v : p)
    if (!(v >= 0.0 && v <= 1.0)) throw std::domain_error("bh_adjust: p-value outside [0, 1]");
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return p[a] < p[b]; });
  std::vector<double> q(m);
  double running = 1.0;
  for (std::size_t r = m; r-- > 0;) {
    const double candidate = p[order[r]] * (static_cast<double>(m) / static_cast<double>(r + 1));
    running = std::min(running, candidate);
    q[order[r]] = std::min(1.0, running);
  }
  return q;
}

std::vector<std::optional<double>> bh_adjust(std::span<const std::optional<double>> p) {
  std::vector<double> present;
  std::vector<std::size_t> where;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i]) {
      present.push_back(*p[i]);
      where.push_back(i);
    }
  const auto q = bh_adjust(present);
  std::vector<std::optional<double>> out(p.size());
  for (std::size_t i = 0; i < where.size(); ++i) out[where[i]] = q[i];
  return out;
}

std::vector<TestResult> run_frequentist_dpa(const AnalysisInput& input, TestMethod method, double alpha,
                                            const FrequentistOptions& options) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("alpha must lie in (0, 1)");
  const Eigen::MatrixXd X = input.design_matrix();
  constexpr int kGroup = 1;
  std::vector<TestResult> results;
  results.reserve(input.n_features());
  for (std::size_t j = 0; j < input.n_features(); ++j) {
    const Eigen::VectorXd y = input.presence.col(static_cast<Eigen::Index>(j));
    TestResult r;
    try {
      switch (method) {
        case TestMethod::wald: r = wald_test(irls_fit(y, X), kGroup, alpha); break;
        case TestMethod::lrt: r = lrt_test(y, X, kGroup, alpha); break;
        case TestMethod::firth: r = firth_plrt(y, X, kGroup, alpha, options.firth); break;
      }
    } catch (const std::exception& e) {
      r = TestResult{};
      r.note = e.what();
    }
    r.method = method;
    r.feature_id = input.feature_ids[j];
    results.push_back(std::move(r));
  }
  std::vector<std::optional<double>> p;
  for (const auto& r : results) p.push_back(r.p);
  const auto q = bh_adjust(p);
  for (std::size_t j = 0; j < results.size(); ++j) {
    results[j].q = q[j];
    results[j].significant = q[j].has_value() && *q[j] < alpha;
  }
  return results;
}

}  // namespace dipper
