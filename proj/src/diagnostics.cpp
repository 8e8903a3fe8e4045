#include "dipper/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dipper/stats.hpp"

namespace dipper {

namespace {

using Chains = std::vector<std::vector<double>>;

bool degenerate(const Chains& chains) {
  bool first = true;
  double ref = 0.0;
  bool constant = true;
  for (const auto& c : chains)
    for (double v : c) {
      if (!std::isfinite(v)) return true;
      if (first) {
        ref = v;
        first = false;
      } else if (v != ref) {
        constant = false;
      }
    }
  return first || constant;
}

Chains split_chains(const Chains& chains) {
  Chains out;
  for (const auto& c : chains) {
    const std::size_t n = c.size();
    const std::size_t half = n / 2;
    out.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
    out.emplace_back(c.begin() + static_cast<std::ptrdiff_t>(n - half), c.end());
  }
  return out;
}

// Normal scores of the pooled ranks (average ranks for ties).
Chains rank_normalize(const Chains& chains) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t c = 0; c < chains.size(); ++c)
    for (std::size_t i = 0; i < chains[c].size(); ++i) all.emplace_back(chains[c][i], all.size());
  const std::size_t s = all.size();
  std::vector<std::size_t> order(s);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return all[a].first < all[b].first; });
  std::vector<double> rank(s);
  for (std::size_t i = 0; i < s;) {
    std::size_t j = i;
    while (j + 1 < s && all[order[j + 1]].first == all[order[i]].first) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) rank[order[t]] = avg;
    i = j + 1;
  }
  Chains out = chains;
  std::size_t k = 0;
  for (auto& c : out)
    for (auto& v : c) v = stats::normal_quantile((rank[k++] - 0.375) / (static_cast<double>(s) + 0.25));
  return out;
}

Chains fold(const Chains& chains) {
  std::vector<double> all;
  for (const auto& c : chains) all.insert(all.end(), c.begin(), c.end());
  const double med = stats::median(all);
  Chains out = chains;
  for (auto& c : out)
    for (auto& v : c) v = std::abs(v - med);
  return out;
}

// Biased (1/n) autocovariance at one lag.
double autocovariance(const std::vector<double>& x, double mean, std::size_t lag) {
  const std::size_t n = x.size();
  double s = 0.0;
  for (std::size_t i = 0; i + lag < n; ++i) s += (x[i] - mean) * (x[i + lag] - mean);
  return s / static_cast<double>(n);
}

}  // namespace

double split_rhat_basic(const Chains& chains_in) {
  if (degenerate(chains_in)) return NAN;
  const Chains chains = split_chains(chains_in);
  const std::size_t m = chains.size();
  const double n = static_cast<double>(chains.front().size());
  if (n < 2) return NAN;
  std::vector<double> means, vars;
  for (const auto& c : chains) {
    means.push_back(stats::mean(c));
    vars.push_back(stats::variance(c));
  }
  const double var_between = n * (m > 1 ? stats::variance(means) : 0.0);
  const double var_within = stats::mean(vars);
  if (!(var_within > 0.0)) return NAN;
  return std::sqrt((var_between / var_within + n - 1.0) / n);
}

double split_rhat(const Chains& chains) {
  if (degenerate(chains)) return NAN;
  // split_rhat_basic does the splitting; pooled ranks do not depend on it.
  const double bulk = split_rhat_basic(rank_normalize(chains));
  const double tail = split_rhat_basic(rank_normalize(fold(chains)));
  if (std::isnan(tail)) return bulk;
  return std::max(bulk, tail);
}

namespace {

// ESS of chains that have already been split / transformed.
double ess_of(const Chains& chains) {
  const std::size_t m = chains.size();
  const std::size_t n = chains.front().size();
  if (n < 4) return NAN;
  std::vector<double> means(m), acov0(m);
  for (std::size_t c = 0; c < m; ++c) {
    means[c] = stats::mean(chains[c]);
    acov0[c] = autocovariance(chains[c], means[c], 0);
  }
  const double nd = static_cast<double>(n);
  const double mean_var = stats::mean(acov0) * nd / (nd - 1.0);
  double var_plus = mean_var * (nd - 1.0) / nd;
  if (m > 1) var_plus += stats::variance(means);
  if (!(var_plus > 0.0)) return NAN;

  auto rho_at = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t c = 0; c < m; ++c) s += autocovariance(chains[c], means[c], lag);
    return 1.0 - (mean_var - s / static_cast<double>(m)) / var_plus;
  };

  // Geyer's initial positive sequence over lag pairs (even, odd).
  std::vector<double> rho(n + 3, 0.0);
  rho[0] = 1.0;
  double rho_even = 1.0;
  double rho_odd = rho_at(1);
  rho[1] = rho_odd;
  std::size_t s = 1;
  while (s + 4 < n && rho_even + rho_odd > 0.0) {
    rho_even = rho_at(s + 1);
    rho_odd = rho_at(s + 2);
    if (rho_even + rho_odd >= 0.0) {
      rho[s + 1] = rho_even;
      rho[s + 2] = rho_odd;
    }
    s += 2;
  }
  const std::size_t max_s = s;
  if (rho_even > 0.0) rho[max_s + 1] = rho_even;

  // Initial monotone sequence.
  for (std::size_t u = 1; u + 3 <= max_s; u += 2) {
    if (rho[u + 1] + rho[u + 2] > rho[u - 1] + rho[u]) {
      rho[u + 1] = 0.5 * (rho[u - 1] + rho[u]);
      rho[u + 2] = rho[u + 1];
    }
  }

  const double total = static_cast<double>(m) * nd;
  double tau = -1.0;
  for (std::size_t i = 0; i < max_s; ++i) tau += 2.0 * rho[i];
  tau += rho[max_s + 1];
  tau = std::max(tau, 1.0 / std::log10(total));
  return total / tau;
}

}  // namespace

double ess_basic(const Chains& chains) {
  if (degenerate(chains)) return NAN;
  return ess_of(split_chains(chains));
}

double ess_bulk(const Chains& chains) {
  if (degenerate(chains)) return NAN;
  return ess_of(rank_normalize(split_chains(chains)));
}

DiagnosticSeries split_rhat(const DrawArray& draws) {
  DiagnosticSeries out;
  for (int p = 0; p < draws.params(); ++p) {
    const double v = split_rhat(draws.parameter_chains(p));
    out.value.push_back(v);
    out.degenerate.push_back(std::isnan(v));
  }
  return out;
}

DiagnosticSeries ess_bulk(const DrawArray& draws) {
  DiagnosticSeries out;
  for (int p = 0; p < draws.params(); ++p) {
    const double v = ess_bulk(draws.parameter_chains(p));
    out.value.push_back(v);
    out.degenerate.push_back(std::isnan(v));
  }
  return out;
}

}  // namespace dipper
