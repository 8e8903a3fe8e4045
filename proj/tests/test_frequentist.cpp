#include <doctest.h>

#include <cmath>
#include <random>

#include "dipper/frequentist.hpp"
#include "oracles/oracles.hpp"
#include "support.hpp"

using namespace dipper;

namespace {

struct TwoByTwo {
  Eigen::VectorXd y;
  Eigen::MatrixXd X;
};

// n0 controls with y0 present, then n1 cases with y1 present; columns [1, group].
TwoByTwo two_by_two(int n0, int y0, int n1, int y1) {
  TwoByTwo d;
  d.y.setZero(n0 + n1);
  d.X.setOnes(n0 + n1, 2);
  for (int i = 0; i < n0; ++i) {
    d.X(i, 1) = 0.0;
    d.y[i] = i < y0 ? 1.0 : 0.0;
  }
  for (int i = 0; i < n1; ++i) d.y[n0 + i] = i < y1 ? 1.0 : 0.0;
  return d;
}

// Bernoulli log-likelihood of y successes in n trials at the MLE y/n.
double saturated_binomial(int y, int n) {
  double ll = 0.0;
  if (y > 0) ll += y * std::log(static_cast<double>(y) / n);
  if (y < n) ll += (n - y) * std::log(static_cast<double>(n - y) / n);
  return ll;
}

// Penalized log-likelihood of the two-group design written out by hand:
// the information matrix of [1, group] has determinant n0 w0 * n1 w1.
double penalized_2x2(double a, double b, int n0, int y0, int n1, int y1) {
  auto term = [](double eta, int y, int n) {
    const double lp = -std::log1p(std::exp(-eta));
    const double lq = -std::log1p(std::exp(eta));
    return y * lp + (n - y) * lq;
  };
  const double p0 = 1.0 / (1.0 + std::exp(-a));
  const double p1 = 1.0 / (1.0 + std::exp(-(a + b)));
  const double det = n0 * p0 * (1 - p0) * n1 * p1 * (1 - p1);
  return term(a, y0, n0) + term(a + b, y1, n1) + 0.5 * std::log(det);
}

// Grid maximization with repeated zooming around the best cell.
std::pair<double, double> grid_argmax(const std::function<double(double, double)>& f, double lo, double hi) {
  double ca = 0.5 * (lo + hi), cb = ca, half = 0.5 * (hi - lo);
  constexpr int n = 80;
  for (int round = 0; round < 12; ++round) {
    double best = -INFINITY, ba = ca, bb = cb;
    for (int i = 0; i <= n; ++i)
      for (int k = 0; k <= n; ++k) {
        const double a = ca - half + 2.0 * half * i / n;
        const double b = cb - half + 2.0 * half * k / n;
        const double v = f(a, b);
        if (v > best) {
          best = v;
          ba = a;
          bb = b;
        }
      }
    ca = ba;
    cb = bb;
    half *= 0.1;
  }
  return {ca, cb};
}

// Logistic data with an intercept, a balanced group column and one
// standard-normal covariate.
TwoByTwo logistic_sample(int n, double a, double b, double c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  TwoByTwo d;
  d.y.resize(n);
  d.X.resize(n, 3);
  for (int i = 0; i < n; ++i) {
    d.X(i, 0) = 1.0;
    d.X(i, 1) = i % 2;
    d.X(i, 2) = z(rng);
    const double eta = a + b * d.X(i, 1) + c * d.X(i, 2);
    d.y[i] = u(rng) < 1.0 / (1.0 + std::exp(-eta)) ? 1.0 : 0.0;
  }
  return d;
}

}  // namespace

TEST_CASE("irls reproduces the closed-form 2x2 log odds ratio") {
  const auto d = two_by_two(20, 10, 20, 15);
  const auto fit = irls_fit(d.y, d.X);
  CHECK(fit.converged);
  CHECK_FALSE(fit.separated);
  CHECK(fit.coefficients[1] == doctest::Approx(std::log(15.0 * 10.0 / (5.0 * 10.0))).epsilon(1e-9));
  const double se = std::sqrt(1.0 / 15 + 1.0 / 5 + 1.0 / 10 + 1.0 / 10);
  CHECK(std::sqrt(fit.cov_matrix(1, 1)) == doctest::Approx(se).epsilon(1e-8));
  CHECK(fit.log_likelihood == doctest::Approx(saturated_binomial(10, 20) + saturated_binomial(15, 20)).epsilon(1e-10));

  const auto r = wald_test(fit, 1, 0.10);
  REQUIRE(r.p.has_value());
  const double z = std::log(3.0) / se;
  CHECK(z == doctest::Approx(1.60821).epsilon(1e-5));
  CHECK(*r.p == doctest::Approx(2.0 * oracle::normal_cdf(-z)).epsilon(1e-10));
  CHECK(*r.ci_low == doctest::Approx(std::log(3.0) - 1.6448536269514722 * se).epsilon(1e-9));
  CHECK(*r.ci_high == doctest::Approx(std::log(3.0) + 1.6448536269514722 * se).epsilon(1e-9));
}

TEST_CASE("wald p-value is one at a zero estimate and absent under separation") {
  const auto balanced = two_by_two(20, 10, 20, 10);
  const auto r0 = wald_test(irls_fit(balanced.y, balanced.X), 1);
  REQUIRE(r0.p.has_value());
  CHECK(*r0.p == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(*r0.estimate) < 1e-10);

  const auto sep = two_by_two(20, 5, 20, 20);
  const auto fit = irls_fit(sep.y, sep.X);
  CHECK(fit.separated);
  const auto r = wald_test(fit, 1);
  CHECK_FALSE(r.p.has_value());
  CHECK_FALSE(r.estimate.has_value());
  CHECK_FALSE(r.se.has_value());
  CHECK_FALSE(r.note.empty());
}

TEST_CASE("constant response with an intercept-only design is flagged as separated") {
  const Eigen::VectorXd y = Eigen::VectorXd::Ones(12);
  const Eigen::MatrixXd X = Eigen::MatrixXd::Ones(12, 1);
  const auto fit = irls_fit(y, X);
  CHECK(fit.separated);
  CHECK(fit.coefficients[0] > kSeparationBound);
}

TEST_CASE("rank-deficient designs raise a design error") {
  auto d = two_by_two(10, 4, 10, 6);
  Eigen::MatrixXd X(d.X.rows(), 3);
  X << d.X, d.X.col(1) * 2.0;
  CHECK_THROWS_AS(irls_fit(d.y, X), DesignError);
  CHECK_THROWS_AS(firth_fit(d.y, X), DesignError);
}

TEST_CASE("likelihood ratio test matches group-wise binomial likelihoods") {
  const auto d = two_by_two(20, 10, 20, 15);
  const double full = saturated_binomial(10, 20) + saturated_binomial(15, 20);
  const double null = saturated_binomial(25, 40);
  CHECK(full == doctest::Approx(-25.10964).epsilon(1e-6));
  CHECK(null == doctest::Approx(-26.46253).epsilon(1e-6));
  const double dev = 2.0 * (full - null);
  CHECK(dev == doctest::Approx(2.70577).epsilon(1e-5));
  const auto r = lrt_test(d.y, d.X, 1);
  REQUIRE(r.p.has_value());
  CHECK(*r.p == doctest::Approx(oracle::chi2_1_sf(dev)).epsilon(1e-8));
  CHECK(*r.p == doctest::Approx(0.10000).epsilon(1e-4));
  CHECK(*r.estimate == doctest::Approx(std::log(3.0)).epsilon(1e-9));

  SUBCASE("identical groups") {
    const auto e = two_by_two(20, 10, 20, 10);
    const auto s = lrt_test(e.y, e.X, 1);
    CHECK(*s.p == doctest::Approx(1.0).epsilon(1e-10));
  }
  SUBCASE("separated full model keeps a p-value but no estimate") {
    const auto e = two_by_two(20, 5, 20, 20);
    const auto s = lrt_test(e.y, e.X, 1);
    REQUIRE(s.p.has_value());
    CHECK_FALSE(s.estimate.has_value());
    const double dev_sep = 2.0 * (saturated_binomial(5, 20) + saturated_binomial(20, 20) - saturated_binomial(25, 40));
    // The full fit stops on a likelihood plateau, so allow a tiny deficit.
    CHECK(*s.p == doctest::Approx(oracle::chi2_1_sf(dev_sep)).epsilon(1e-6));
    CHECK(*s.p < 1e-6);
  }
  SUBCASE("reduced model separated leaves the p-value absent") {
    const auto e = two_by_two(20, 20, 20, 20);
    const auto s = lrt_test(e.y, e.X, 1);
    CHECK_FALSE(s.p.has_value());
  }
}

TEST_CASE("firth estimate on a separated 2x2 table matches grid maximization") {
  const auto d = two_by_two(20, 5, 20, 20);
  const auto [a, b] = grid_argmax([](double a, double b) { return penalized_2x2(a, b, 20, 5, 20, 20); }, -10, 10);
  // Add-one-half-per-cell estimator; 4.7497 to five significant figures.
  const double closed = std::log((20.5 * 15.5) / (0.5 * 5.5));
  CHECK(b == doctest::Approx(closed).epsilon(1e-8));
  CHECK(std::round(b * 1e4) / 1e4 == doctest::Approx(4.7497).epsilon(1e-12));
  const auto fit = firth_fit(d.y, d.X);
  CHECK(fit.converged);
  CHECK(fit.coefficients[1] == doctest::Approx(b).epsilon(1e-6));
  CHECK(fit.coefficients[0] == doctest::Approx(a).epsilon(1e-6));
  CHECK(fit.penalized_log_likelihood == doctest::Approx(penalized_2x2(a, b, 20, 5, 20, 20)).epsilon(1e-9));
  CHECK(firth_penalized_loglik(d.y, d.X, fit.coefficients) == doctest::Approx(fit.penalized_log_likelihood));

  const auto r = firth_plrt(d.y, d.X, 1);
  REQUIRE(r.p.has_value());
  REQUIRE(r.estimate.has_value());
  CHECK(std::isfinite(*r.p));
  CHECK(*r.p < 1e-4);
  CHECK(*r.ci_low < *r.estimate);
  CHECK(*r.ci_high > *r.estimate);
}

TEST_CASE("firth penalized likelihood ratio statistic matches the restricted grid maximum") {
  const auto d = two_by_two(20, 6, 20, 13);
  const auto [a, b] = grid_argmax([](double a, double b) { return penalized_2x2(a, b, 20, 6, 20, 13); }, -10, 10);
  // Restricted maximum over the intercept with the group effect pinned at 0.
  double lo = -10, hi = 10;
  for (int it = 0; it < 200; ++it) {
    const double m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
    if (penalized_2x2(m1, 0.0, 20, 6, 20, 13) < penalized_2x2(m2, 0.0, 20, 6, 20, 13))
      lo = m1;
    else
      hi = m2;
  }
  const double stat = 2.0 * (penalized_2x2(a, b, 20, 6, 20, 13) - penalized_2x2(0.5 * (lo + hi), 0.0, 20, 6, 20, 13));
  const auto r = firth_plrt(d.y, d.X, 1);
  CHECK(*r.p == doctest::Approx(oracle::chi2_1_sf(stat)).epsilon(1e-7));
}

TEST_CASE("firth estimate is zero on a balanced table") {
  const auto d = two_by_two(20, 10, 20, 10);
  const auto r = firth_plrt(d.y, d.X, 1);
  CHECK(std::abs(*r.estimate) < 1e-9);
  CHECK(*r.p == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("firth profile interval brackets the estimate and contains the Wald-type interval's center") {
  const auto d = two_by_two(20, 5, 20, 20);
  const auto r = firth_plrt(d.y, d.X, 1, 0.10, FirthOptions{.profile_ci = true});
  REQUIRE(r.ci_low.has_value());
  REQUIRE(std::isfinite(*r.ci_low));
  CHECK(*r.ci_low < *r.estimate);
  CHECK(*r.ci_high > *r.estimate);
  // The bounds sit where the penalized deviance rises by the chi-squared quantile.
  const auto full = firth_fit(d.y, d.X);
  for (double bound : {*r.ci_low, *r.ci_high}) {
    if (!std::isfinite(bound)) continue;
    const auto pinned = firth_fit(d.y, d.X, 1, bound);
    CHECK(2.0 * (full.penalized_log_likelihood - pinned.penalized_log_likelihood) ==
          doctest::Approx(2.705543454095404).epsilon(1e-5));
  }
}

TEST_CASE("firth and maximum likelihood agree on large non-separated samples") {
  const auto d = logistic_sample(5000, -0.3, 0.4, 0.7, 11);
  const auto ml = irls_fit(d.y, d.X);
  const auto pen = firth_fit(d.y, d.X);
  for (int c = 0; c < 3; ++c) CHECK(std::abs(ml.coefficients[c] - pen.coefficients[c]) < 0.02);
}

TEST_CASE("wald and likelihood ratio p-values agree on well-behaved samples") {
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    const double b = -0.5 + 0.25 * static_cast<double>(seed - 1);
    const auto d = logistic_sample(2000, 0.2, b, -0.3, seed);
    const auto w = wald_test(irls_fit(d.y, d.X), 1);
    const auto l = lrt_test(d.y, d.X, 1);
    CHECK(std::abs(*w.p - *l.p) < 0.005);
  }
}

TEST_CASE("firth estimates stay finite under complete separation with covariates") {
  auto d = logistic_sample(60, 0.0, 0.0, 1.0, 3);
  for (int i = 0; i < 60; ++i) d.y[i] = d.X(i, 1);  // response equals group
  const auto fit = firth_fit(d.y, d.X);
  CHECK(fit.converged);
  for (int c = 0; c < 3; ++c) CHECK(std::isfinite(fit.coefficients[c]));
  CHECK(irls_fit(d.y, d.X).separated);
}

TEST_CASE("bh_adjust worked examples") {
  const std::vector<double> p{0.01, 0.02, 0.04, 0.5};
  const auto q = bh_adjust(p);
  CHECK(q[0] == doctest::Approx(0.04));
  CHECK(q[1] == doctest::Approx(0.04));
  CHECK(q[2] == doctest::Approx(0.16 / 3.0));
  CHECK(q[3] == doctest::Approx(0.5));

  const std::vector<double> ties(5, 0.03);
  for (double v : bh_adjust(ties)) CHECK(v == doctest::Approx(0.03));

  const std::vector<double> one{0.37};
  CHECK(bh_adjust(one)[0] == 0.37);
  CHECK(bh_adjust(std::vector<double>{}).empty());
}

TEST_CASE("bh_adjust rejects p-values outside the unit interval") {
  CHECK_THROWS_AS(bh_adjust(std::vector<double>{0.1, 1.2}), std::domain_error);
  CHECK_THROWS_AS(bh_adjust(std::vector<double>{-0.01}), std::domain_error);
  CHECK_THROWS_AS(bh_adjust(std::vector<double>{NAN}), std::domain_error);
}

TEST_CASE("bh_adjust equals the brute-force step-up rule and is monotone") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> size(1, 40);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 300; ++rep) {
    std::vector<double> p(static_cast<std::size_t>(size(rng)));
    for (auto& v : p) v = rep % 3 == 0 ? std::round(u(rng) * 10) / 10 : u(rng) * u(rng);
    const auto q = bh_adjust(p);
    const auto ref = oracle::bh_step_up(p);
    for (std::size_t i = 0; i < p.size(); ++i) {
      CHECK(q[i] == ref[i]);
      CHECK(q[i] >= p[i]);
      for (std::size_t k = 0; k < p.size(); ++k)
        if (p[i] <= p[k]) CHECK(q[i] <= q[k]);
    }
  }
}

TEST_CASE("absent p-values are left out of the BH family") {
  const std::vector<std::optional<double>> p{0.01, std::nullopt, 0.02, std::nullopt, 0.04, 0.5};
  const auto q = bh_adjust(p);
  CHECK_FALSE(q[1].has_value());
  CHECK_FALSE(q[3].has_value());
  const auto dense = bh_adjust(std::vector<double>{0.01, 0.02, 0.04, 0.5});
  CHECK(*q[0] == dense[0]);
  CHECK(*q[2] == dense[1]);
  CHECK(*q[4] == dense[2]);
  CHECK(*q[5] == dense[3]);
}

TEST_CASE("run_frequentist_dpa with a single feature flags at the unadjusted level") {
  auto in = testing_support::random_input(60, 1, 1, 5, 0.5);
  for (int i = 0; i < 60; ++i) in.presence(i, 0) = (i >= 30 && i % 5 != 0) || (i < 30 && i % 3 == 0) ? 1.0 : 0.0;
  for (auto method : {TestMethod::wald, TestMethod::lrt, TestMethod::firth}) {
    const auto res = run_frequentist_dpa(in, method, 0.10);
    REQUIRE(res.size() == 1);
    REQUIRE(res[0].p.has_value());
    CHECK(*res[0].q == *res[0].p);
    CHECK(res[0].significant == (*res[0].p < 0.10));
    CHECK(res[0].feature_id == "f0");
    CHECK(res[0].method == method);
  }
  CHECK_THROWS_AS(run_frequentist_dpa(in, TestMethod::wald, 0.0), std::domain_error);
  CHECK_THROWS_AS(run_frequentist_dpa(in, TestMethod::wald, 1.0), std::domain_error);
}

TEST_CASE("run_frequentist_dpa uses the full design and preserves feature order") {
  const auto in = testing_support::random_input(50, 6, 2, 17, 0.4);
  const auto res = run_frequentist_dpa(in, TestMethod::wald, 0.10);
  const Eigen::MatrixXd X = in.design_matrix();
  REQUIRE(X.cols() == 5);
  for (int j = 0; j < 6; ++j) {
    CHECK(res[j].feature_id == in.feature_ids[j]);
    const auto direct = wald_test(irls_fit(in.presence.col(j), X), 1);
    if (direct.p) CHECK(*res[j].p == *direct.p);
  }
}

TEST_CASE("firth recovers ten planted strong effects among one hundred features") {
  const int n = 200, k = 100;
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto in = testing_support::random_input(n, k, 0, 42);
  std::vector<double> beta(k, 0.0);
  for (int j = 0; j < 10; ++j) beta[j * 10] = (j % 2 == 0 ? 1.0 : -1.0) * (3.0 + 0.2 * j);
  for (int j = 0; j < k; ++j) {
    const double a = -1.0 + 2.0 * u(rng) - beta[j] / 2.0;
    for (int i = 0; i < n; ++i) {
      const double eta = a + beta[j] * in.group[i] + 1.0 * in.log_reads_centered[i];
      in.presence(i, j) = u(rng) < 1.0 / (1.0 + std::exp(-eta)) ? 1.0 : 0.0;
    }
  }
  const auto res = run_frequentist_dpa(in, TestMethod::firth, 0.10);
  for (int j = 0; j < k; ++j) {
    if (beta[j] == 0.0) continue;
    CHECK(res[j].significant);
    CHECK(std::abs(*res[j].estimate) >= 2.0);
    CHECK((*res[j].estimate > 0) == (beta[j] > 0));
  }
}
