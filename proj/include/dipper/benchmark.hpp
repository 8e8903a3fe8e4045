#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dipper/data.hpp"

namespace dipper {

/// A Bayesian result was asked to re-derive significance without its draws.
class CapabilityError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Synthetic data

struct SyntheticSpec {
  int n_per_group = 50;
  int n_features = 100;
  double fraction_nonnull = 0.2;
  // Asymmetric Laplace effect distribution (location 0, P(beta <= 0) = nu).
  double effect_tau = 1.0;
  double effect_nu = 0.5;
  // Baseline prevalence of each feature, uniform on this interval.
  double prevalence_low = 0.2;
  double prevalence_high = 0.8;
  // Per-sample read depth: log10 uniform on this interval.
  double log10_reads_low = 4.0;
  double log10_reads_high = 5.0;
  /// Coefficient of centered log10 read depth in the presence model.
  double reads_effect = 1.0;
  std::uint64_t seed = 1;
  /// Sample-stream index. Datasets that differ only here share their true
  /// effects but have independent samples (replica studies).
  std::uint64_t replicate = 0;

  void validate() const;
};

std::string synthetic_spec_to_json(const SyntheticSpec& spec);
SyntheticSpec synthetic_spec_from_json(std::string_view json);

struct SyntheticTruth {
  std::vector<std::string> feature_ids;
  std::vector<double> alpha;
  std::vector<double> beta;
  std::vector<bool> nonnull;
};

struct SyntheticDataset {
  FeatureTable table;
  SyntheticTruth truth;
};

/// Draws a presence/absence table from the logistic model with read depth.
/// The first n_per_group samples are controls. Present cells carry positive
/// counts so the table also feeds the Gaussian variant.
SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

/// Inverse-CDF draw from the asymmetric Laplace with P(X <= 0) = nu.
double sample_asymmetric_laplace(double u, double tau, double nu);

// ---------------------------------------------------------------------------
// Significance calls and replication

enum class Direction { positive, negative };

struct SignificanceCall {
  std::string feature_id;
  Direction direction = Direction::positive;
  bool significant = false;
  std::string method;
  double alpha = 0.10;
};

struct NullErrorReport {
  std::size_t n_datasets = 0;
  std::size_t n_with_any_finding = 0;
  double lambda = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::vector<bool> any_finding;  // per dataset, in dataset order
};

/// lambda = fraction of null datasets with at least one finding, with a 90%
/// Wilson interval. Throws std::invalid_argument on an empty list.
NullErrorReport null_error_rate(const std::vector<bool>& any_finding);

/// Runs `any_finding(i)` for every dataset index and summarizes.
NullErrorReport null_error_rate(std::size_t n_datasets, const std::function<bool(std::size_t)>& any_finding);

struct DatasetCount {
  std::size_t n_significant = 0;
  std::size_t n_tested = 0;
  double proportion = 0.0;
};

struct CorpusCounts {
  std::vector<DatasetCount> datasets;
  double mean_count = 0.0;
  double median_count = 0.0;
  double mean_proportion = 0.0;
  double median_proportion = 0.0;
};

/// Per-dataset counts of significance flags and corpus-level summaries.
CorpusCounts count_significant(const std::vector<std::vector<bool>>& significance);

struct AlphaPoint {
  double alpha = 0.0;
  std::size_t replicated = 0;
  std::size_t conflicting = 0;
};

struct ReplicationReport {
  std::string pair_id;
  std::size_t n_replicated = 0;
  std::size_t n_conflicting = 0;
  std::vector<std::string> replicated;
  std::vector<std::string> conflicting;
  std::vector<AlphaPoint> curve;
};

/// Features significant in both lists: same direction replicates, opposite
/// direction conflicts. Features missing from either list are ignored.
/// Throws std::invalid_argument on a duplicate feature id within one list.
ReplicationReport replication_counts(const std::vector<SignificanceCall>& a, const std::vector<SignificanceCall>& b,
                                     const std::string& pair_id = "pair");

/// One feature's result in a form whose significance can be re-derived at
/// any alpha: via q < alpha for threshold methods, or from the stored
/// posterior draws of the effect for Bayesian methods.
struct RescorableResult {
  std::string feature_id;
  std::optional<double> estimate;
  std::optional<double> q;
  std::optional<std::vector<double>> draws;
  /// Replaces the sign of `estimate` when set.
  std::optional<Direction> direction_override;
};

struct RescorableResults {
  std::string method;
  bool bayesian = false;
  std::vector<RescorableResult> features;
};

/// Significance calls at `alpha`. Results without any usable direction are
/// left out. Throws CapabilityError for a Bayesian result lacking draws.
std::vector<SignificanceCall> calls_at(const RescorableResults& results, double alpha);

std::vector<AlphaPoint> alpha_sweep(const RescorableResults& a, const RescorableResults& b,
                                    const std::vector<double>& alphas);

struct DirectionImbalance {
  std::size_t n_positive = 0;
  std::size_t n_negative = 0;
  /// Majority-direction share among significant calls; absent when none.
  std::optional<double> proportion;
};

DirectionImbalance direction_imbalance(const std::vector<SignificanceCall>& calls);

std::string to_string(Direction d);

}  // namespace dipper
