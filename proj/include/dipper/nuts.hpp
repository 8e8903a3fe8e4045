#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dipper {

/// Log density with gradient: writes d/dz into `grad` and returns log p(z).
/// Returning a non-finite value rejects the point.
using LogDensityGradient = std::function<double(std::span<const double> z, std::span<double> grad)>;

struct SamplerConfig {
  int chains = 4;
  int iterations = 3000;  // including warmup
  int warmup = 1000;
  double target_accept = 0.8;
  int max_tree_depth = 10;
  std::uint64_t seed = 1;
  /// Worker threads for running chains; results do not depend on it.
  int threads = 1;
  double max_energy_error = 1000.0;

  int retained_per_chain() const { return iterations - warmup; }
  void validate() const;
};

class InitializationError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Draws stored chain-major: (chain, iteration, parameter).
class DrawArray {
 public:
  DrawArray() = default;
  DrawArray(int chains, int draws, int params);

  int chains() const { return chains_; }
  int draws() const { return draws_; }
  int params() const { return params_; }

  double& operator()(int chain, int draw, int param) { return data_[index(chain, draw, param)]; }
  double operator()(int chain, int draw, int param) const { return data_[index(chain, draw, param)]; }

  std::span<double> row(int chain, int draw) {
    return {data_.data() + index(chain, draw, 0), static_cast<std::size_t>(params_)};
  }
  std::span<const double> row(int chain, int draw) const {
    return {data_.data() + index(chain, draw, 0), static_cast<std::size_t>(params_)};
  }

  /// One vector per chain for a single parameter.
  std::vector<std::vector<double>> parameter_chains(int param) const;
  /// All chains of a parameter concatenated.
  std::vector<double> pooled(int param) const;

  bool operator==(const DrawArray&) const = default;

 private:
  std::size_t index(int c, int d, int p) const {
    return (static_cast<std::size_t>(c) * static_cast<std::size_t>(draws_) + static_cast<std::size_t>(d)) *
               static_cast<std::size_t>(params_) +
           static_cast<std::size_t>(p);
  }
  int chains_ = 0;
  int draws_ = 0;
  int params_ = 0;
  std::vector<double> data_;
};

struct ChainStats {
  double step_size = 0.0;
  std::vector<double> inverse_metric;
  int divergences = 0;  // post-warmup
  int warmup_divergences = 0;
  int max_depth_hits = 0;
  double mean_accept_stat = 0.0;
  double mean_tree_depth = 0.0;
  long long leapfrog_steps = 0;
};

/// Per-parameter convergence statistic; `degenerate` marks parameters whose
/// draws are constant (value is NaN).
struct DiagnosticSeries {
  std::vector<double> value;
  std::vector<bool> degenerate;
};

struct PosteriorDraws {
  DrawArray draws;  // post-warmup, sampler coordinates
  std::vector<std::uint8_t> divergent;  // per (chain, draw)
  int divergence_count = 0;
  DiagnosticSeries rhat;
  DiagnosticSeries ess_bulk;
  std::vector<ChainStats> chain_stats;

  int total_draws() const { return draws.chains() * draws.draws(); }
};

/// Multinomial NUTS with a diagonal metric. Warmup adapts the step size by
/// dual averaging and the metric from windowed variance estimates. `inits`
/// holds one starting point per chain.
PosteriorDraws run_nuts(const LogDensityGradient& target, int dimension, const SamplerConfig& config,
                        const std::vector<std::vector<double>>& inits);

}  // namespace dipper
