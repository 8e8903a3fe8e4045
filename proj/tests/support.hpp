#pragma once

#include <random>
#include <string>

#include "dipper/data.hpp"

namespace testing_support {

/// Small analysis input with random presence, centered reads and m
/// standardized-looking covariates. Relative abundances are positive
/// exactly where the feature is present.
inline dipper::AnalysisInput random_input(int n, int k, int m, std::uint64_t seed, double prevalence = 0.5) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  dipper::AnalysisInput in;
  in.presence.resize(n, k);
  in.rel_abundance.resize(n, k);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) {
      const bool present = u(rng) < prevalence;
      in.presence(i, j) = present ? 1.0 : 0.0;
      in.rel_abundance(i, j) = present ? std::exp(-5.0 + z(rng)) : 0.0;
    }
  for (int i = 0; i < n; ++i) in.group.push_back(i < n / 2 ? 0 : 1);
  in.log_reads_centered.resize(n);
  for (int i = 0; i < n; ++i) in.log_reads_centered[i] = u(rng) - 0.5;
  in.log_reads_centered.array() -= in.log_reads_centered.mean();
  in.covariates_std.resize(n, m);
  for (int c = 0; c < m; ++c) {
    in.covariate_names.push_back("x" + std::to_string(c));
    in.covariate_is_binary.push_back(false);
    for (int i = 0; i < n; ++i) in.covariates_std(i, c) = z(rng);
  }
  for (int j = 0; j < k; ++j) in.feature_ids.push_back("f" + std::to_string(j));
  return in;
}

}  // namespace testing_support
