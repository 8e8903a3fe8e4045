#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "dipper/data.hpp"

namespace dipper {

class DesignError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class ConvergenceError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// |coefficient| above this on the log-odds scale is treated as separation.
inline constexpr double kSeparationBound = 15.0;

struct GlmFit {
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd cov_matrix;  // inverse Fisher information at the optimum
  double log_likelihood = 0.0;
  /// Penalized log-likelihood (Firth fits only).
  double penalized_log_likelihood = 0.0;
  bool converged = false;
  bool separated = false;
  int iterations = 0;
};

/// Maximum-likelihood logistic regression by IRLS with step-halving. Stops
/// when the largest coefficient change is below 1e-8, after 100 iterations,
/// or once a coefficient passes 30 in magnitude (the likelihood has then
/// plateaued to within ~1e-12). Throws DesignError if X lacks full column rank.
GlmFit irls_fit(const Eigen::VectorXd& y, const Eigen::MatrixXd& X);

/// Firth (Jeffreys-penalized) logistic regression by modified-score Newton
/// steps with step-halving. `fixed_index`, when set, pins that coefficient at
/// `fixed_value` while the penalty still uses the full design's information.
GlmFit firth_fit(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, std::optional<int> fixed_index = std::nullopt,
                 double fixed_value = 0.0);

/// log L(beta) + 0.5 log det I(beta).
double firth_penalized_loglik(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, const Eigen::VectorXd& beta);
double logistic_loglik(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, const Eigen::VectorXd& beta);

enum class TestMethod { wald, lrt, firth };

std::string to_string(TestMethod method);
TestMethod test_method_from_string(std::string_view name);

/// Per-feature test outcome. Absent fields mark boundary situations
/// (separation, failed fits) documented in `note`.
struct TestResult {
  std::string feature_id;
  TestMethod method = TestMethod::wald;
  std::optional<double> estimate;
  std::optional<double> se;
  std::optional<double> ci_low;
  std::optional<double> ci_high;
  std::optional<double> p;
  std::optional<double> q;
  bool significant = false;
  std::string note;
};

TestResult wald_test(const GlmFit& fit, int coef, double alpha = 0.10);
TestResult lrt_test(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, int coef, double alpha = 0.10);

struct FirthOptions {
  /// Profile penalized-likelihood interval instead of the Wald-type one.
  bool profile_ci = false;
};

TestResult firth_plrt(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, int coef, double alpha = 0.10,
                      const FirthOptions& options = {});

/// Benjamini-Hochberg step-up adjustment; output in input order.
std::vector<double> bh_adjust(std::span<const double> p);
/// Same, with absent p-values excluded from the family and left absent.
std::vector<std::optional<double>> bh_adjust(std::span<const std::optional<double>> p);

struct FrequentistOptions {
  FirthOptions firth;
};

/// Fits intercept + group + centered log reads + covariates per feature, tests
/// the group coefficient, BH-adjusts across features with a p-value, and marks
/// q < alpha. A failure on one feature is recorded on that row only.
std::vector<TestResult> run_frequentist_dpa(const AnalysisInput& input, TestMethod method, double alpha = 0.10,
                                            const FrequentistOptions& options = {});

}  // namespace dipper
