#include "dipper/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include <json.hpp>

#include "dipper/rng.hpp"
#include "dipper/stats.hpp"
#include "dipper/summary.hpp"

namespace dipper {

void SyntheticSpec::validate() const {
  if (n_per_group < 1) throw std::invalid_argument("n_per_group must be at least 1");
  if (n_features < 1) throw std::invalid_argument("n_features must be at least 1");
  if (!(fraction_nonnull >= 0.0 && fraction_nonnull <= 1.0))
    throw std::invalid_argument("fraction_nonnull must lie in [0, 1]");
  if (!(effect_tau > 0.0)) throw std::invalid_argument("effect_tau must be positive");
  if (!(effect_nu > 0.0 && effect_nu < 1.0)) throw std::invalid_argument("effect_nu must lie in (0, 1)");
  if (!(prevalence_low > 0.0 && prevalence_low <= prevalence_high && prevalence_high < 1.0))
    throw std::invalid_argument("prevalence range must satisfy 0 < low <= high < 1");
  if (!(log10_reads_low <= log10_reads_high && log10_reads_low >= 0.0))
    throw std::invalid_argument("log10 read range must satisfy 0 <= low <= high");
  if (!std::isfinite(reads_effect)) throw std::invalid_argument("reads_effect must be finite");
}

std::string synthetic_spec_to_json(const SyntheticSpec& s) {
  nlohmann::ordered_json j;
  j["n_per_group"] = s.n_per_group;
  j["n_features"] = s.n_features;
  j["fraction_nonnull"] = s.fraction_nonnull;
  j["effect_tau"] = s.effect_tau;
  j["effect_nu"] = s.effect_nu;
  j["prevalence_range"] = {s.prevalence_low, s.prevalence_high};
  j["log10_reads_range"] = {s.log10_reads_low, s.log10_reads_high};
  j["reads_effect"] = s.reads_effect;
  j["seed"] = s.seed;
  j["replicate"] = s.replicate;
  return j.dump(2);
}

SyntheticSpec synthetic_spec_from_json(std::string_view text) {
  const auto j = nlohmann::json::parse(text);
  SyntheticSpec s;
  s.n_per_group = j.value("n_per_group", s.n_per_group);
  s.n_features = j.value("n_features", s.n_features);
  s.fraction_nonnull = j.value("fraction_nonnull", s.fraction_nonnull);
  s.effect_tau = j.value("effect_tau", s.effect_tau);
  s.effect_nu = j.value("effect_nu", s.effect_nu);
  if (j.contains("prevalence_range")) {
    s.prevalence_low = j.at("prevalence_range").at(0).get<double>();
    s.prevalence_high = j.at("prevalence_range").at(1).get<double>();
  }
  if (j.contains("log10_reads_range")) {
    s.log10_reads_low = j.at("log10_reads_range").at(0).get<double>();
    s.log10_reads_high = j.at("log10_reads_range").at(1).get<double>();
  }
  s.reads_effect = j.value("reads_effect", s.reads_effect);
  s.seed = j.value("seed", s.seed);
  s.replicate = j.value("replicate", s.replicate);
  s.validate();
  return s;
}

double sample_asymmetric_laplace(double u, double tau, double nu) {
  if (u < nu) return tau / (1.0 - nu) * std::log(u / nu);
  return -tau / nu * std::log((1.0 - u) / (1.0 - nu));
}

namespace {

std::string padded_id(char prefix, int index, int total) {
  const int width = static_cast<int>(std::to_string(total).size());
  std::string digits = std::to_string(index + 1);
  return std::string(1, prefix) + std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(digits.size()))), '0') + digits;
}

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const int n = 2 * spec.n_per_group;
  const int k = spec.n_features;
  // Separate substreams keep truth and observations stable when one part of
  // the generator changes.
  auto truth_rng = make_engine(spec.seed, {0x74727574ULL});
  auto sample_rng = make_engine(spec.seed, {0x73616d70ULL, spec.replicate});
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  SyntheticDataset out;
  auto& truth = out.truth;
  for (int j = 0; j < k; ++j) {
    truth.feature_ids.push_back(padded_id('F', j, k));
    const double prev = spec.prevalence_low + (spec.prevalence_high - spec.prevalence_low) * unif(truth_rng);
    truth.alpha.push_back(std::log(prev / (1.0 - prev)));
    const bool nonnull = unif(truth_rng) < spec.fraction_nonnull;
    // Always consume the effect draw so the remaining stream is unaffected.
    double u = unif(truth_rng);
    while (u <= 0.0) u = unif(truth_rng);
    const double effect = sample_asymmetric_laplace(u, spec.effect_tau, spec.effect_nu);
    truth.nonnull.push_back(nonnull);
    truth.beta.push_back(nonnull ? effect : 0.0);
  }

  auto& t = out.table;
  t.feature_ids = truth.feature_ids;
  t.counts.resize(n, k);
  t.total_reads.resize(n);
  std::vector<double> log10_reads(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    t.sample_ids.push_back(padded_id('S', i, n));
    t.group.push_back(i < spec.n_per_group ? 0 : 1);
    const double l = spec.log10_reads_low + (spec.log10_reads_high - spec.log10_reads_low) * unif(sample_rng);
    t.total_reads[i] = std::round(std::pow(10.0, l));
    log10_reads[static_cast<std::size_t>(i)] = std::log10(t.total_reads[i]);
  }
  double mean_l = 0.0;
  for (double l : log10_reads) mean_l += l;
  mean_l /= n;

  for (int i = 0; i < n; ++i) {
    const double centered = log10_reads[static_cast<std::size_t>(i)] - mean_l;
    for (int j = 0; j < k; ++j) {
      const auto js = static_cast<std::size_t>(j);
      const double eta = truth.alpha[js] + truth.beta[js] * t.group[static_cast<std::size_t>(i)] +
                         spec.reads_effect * centered;
      const double p = 1.0 / (1.0 + std::exp(-eta));
      const bool present = unif(sample_rng) < p;
      const double rel = std::exp(std::log(1e-3) + normal(sample_rng));
      t.counts(i, j) = present ? std::max(1.0, std::round(t.total_reads[i] * rel)) : 0.0;
    }
  }
  t.covariates.resize(n, 0);
  t.validate();
  return out;
}

// ---------------------------------------------------------------------------

NullErrorReport null_error_rate(const std::vector<bool>& any_finding) {
  if (any_finding.empty()) throw std::invalid_argument("null_error_rate: no datasets");
  NullErrorReport r;
  r.n_datasets = any_finding.size();
  r.n_with_any_finding = static_cast<std::size_t>(std::count(any_finding.begin(), any_finding.end(), true));
  r.lambda = static_cast<double>(r.n_with_any_finding) / static_cast<double>(r.n_datasets);
  const auto ci = stats::wilson_interval(r.n_with_any_finding, r.n_datasets, 0.90);
  r.ci_low = std::min(ci.low, r.lambda);
  r.ci_high = std::max(ci.high, r.lambda);
  r.any_finding = any_finding;
  return r;
}

NullErrorReport null_error_rate(std::size_t n_datasets, const std::function<bool(std::size_t)>& any_finding) {
  std::vector<bool> flags;
  flags.reserve(n_datasets);
  for (std::size_t i = 0; i < n_datasets; ++i) flags.push_back(any_finding(i));
  return null_error_rate(flags);
}

CorpusCounts count_significant(const std::vector<std::vector<bool>>& significance) {
  CorpusCounts out;
  std::vector<double> counts, props;
  for (const auto& flags : significance) {
    DatasetCount c;
    c.n_tested = flags.size();
    c.n_significant = static_cast<std::size_t>(std::count(flags.begin(), flags.end(), true));
    c.proportion = c.n_tested ? static_cast<double>(c.n_significant) / static_cast<double>(c.n_tested) : 0.0;
    counts.push_back(static_cast<double>(c.n_significant));
    props.push_back(c.proportion);
    out.datasets.push_back(c);
  }
  if (!counts.empty()) {
    out.mean_count = stats::mean(counts);
    out.median_count = stats::median(counts);
    out.mean_proportion = stats::mean(props);
    out.median_proportion = stats::median(props);
  }
  return out;
}

namespace {

std::map<std::string, const SignificanceCall*> index_calls(const std::vector<SignificanceCall>& calls,
                                                            const char* which) {
  std::map<std::string, const SignificanceCall*> out;
  for (const auto& c : calls)
    if (!out.emplace(c.feature_id, &c).second)
      throw std::invalid_argument(std::string("duplicate feature id '") + c.feature_id + "' in call list " + which);
  return out;
}

}  // namespace

ReplicationReport replication_counts(const std::vector<SignificanceCall>& a, const std::vector<SignificanceCall>& b,
                                     const std::string& pair_id) {
  const auto ia = index_calls(a, "A");
  const auto ib = index_calls(b, "B");
  ReplicationReport r;
  r.pair_id = pair_id;
  for (const auto& [id, ca] : ia) {
    const auto it = ib.find(id);
    if (it == ib.end()) continue;
    const auto* cb = it->second;
    if (!ca->significant || !cb->significant) continue;
    if (ca->direction == cb->direction)
      r.replicated.push_back(id);
    else
      r.conflicting.push_back(id);
  }
  r.n_replicated = r.replicated.size();
  r.n_conflicting = r.conflicting.size();
  return r;
}

std::vector<SignificanceCall> calls_at(const RescorableResults& results, double alpha) {
  std::vector<SignificanceCall> calls;
  for (const auto& f : results.features) {
    SignificanceCall c;
    c.feature_id = f.feature_id;
    c.method = results.method;
    c.alpha = alpha;
    std::optional<double> signed_value = f.estimate;
    if (results.bayesian) {
      if (!f.draws)
        throw CapabilityError("no stored draws for Bayesian result '" + f.feature_id + "' (method " + results.method +
                              "); significance cannot be re-derived at a new alpha");
      const auto s = summarize_draws(f.feature_id, *f.draws, alpha);
      c.significant = s.significant;
      signed_value = s.median;
    } else {
      c.significant = alpha > 0.0 && f.q.has_value() && *f.q < alpha;
    }
    if (f.direction_override) {
      c.direction = *f.direction_override;
    } else if (signed_value && *signed_value != 0.0) {
      c.direction = *signed_value > 0.0 ? Direction::positive : Direction::negative;
    } else {
      continue;  // no usable direction
    }
    calls.push_back(std::move(c));
  }
  return calls;
}

std::vector<AlphaPoint> alpha_sweep(const RescorableResults& a, const RescorableResults& b,
                                    const std::vector<double>& alphas) {
  std::vector<AlphaPoint> out;
  for (double alpha : alphas) {
    const auto r = replication_counts(calls_at(a, alpha), calls_at(b, alpha));
    out.push_back({alpha, r.n_replicated, r.n_conflicting});
  }
  return out;
}

DirectionImbalance direction_imbalance(const std::vector<SignificanceCall>& calls) {
  DirectionImbalance d;
  for (const auto& c : calls) {
    if (!c.significant) continue;
    (c.direction == Direction::positive ? d.n_positive : d.n_negative)++;
  }
  const auto total = d.n_positive + d.n_negative;
  if (total > 0) d.proportion = static_cast<double>(std::max(d.n_positive, d.n_negative)) / static_cast<double>(total);
  return d;
}

std::string to_string(Direction d) { return d == Direction::positive ? "positive" : "negative"; }

}  // namespace dipper
