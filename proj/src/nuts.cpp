#include "dipper/nuts.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include <Eigen/Dense>

#include "dipper/diagnostics.hpp"
#include "dipper/rng.hpp"

namespace dipper {

void SamplerConfig::validate() const {
  if (chains < 1) throw std::invalid_argument("chains must be >= 1");
  if (warmup < 0) throw std::invalid_argument("warmup must be >= 0");
  if (!(warmup < iterations)) throw std::invalid_argument("warmup must be smaller than iterations");
  if (!(target_accept > 0.0 && target_accept < 1.0)) throw std::invalid_argument("target_accept must lie in (0, 1)");
  if (max_tree_depth < 1) throw std::invalid_argument("max_tree_depth must be >= 1");
  if (threads < 1) throw std::invalid_argument("threads must be >= 1");
  if (!(max_energy_error > 0.0)) throw std::invalid_argument("max_energy_error must be positive");
}

DrawArray::DrawArray(int chains, int draws, int params)
    : chains_(chains),
      draws_(draws),
      params_(params),
      data_(static_cast<std::size_t>(chains) * static_cast<std::size_t>(draws) * static_cast<std::size_t>(params)) {}

std::vector<std::vector<double>> DrawArray::parameter_chains(int param) const {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(chains_));
  for (int c = 0; c < chains_; ++c) {
    auto& v = out[static_cast<std::size_t>(c)];
    v.reserve(static_cast<std::size_t>(draws_));
    for (int d = 0; d < draws_; ++d) v.push_back((*this)(c, d, param));
  }
  return out;
}

std::vector<double> DrawArray::pooled(int param) const {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(chains_) * static_cast<std::size_t>(draws_));
  for (int c = 0; c < chains_; ++c)
    for (int d = 0; d < draws_; ++d) out.push_back((*this)(c, d, param));
  return out;
}

namespace {

using Eigen::VectorXd;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct PhasePoint {
  VectorXd q;
  VectorXd p;
  VectorXd g;  // gradient of log density
  double logp = -kInf;
};

double log_sum_exp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

class DualAveraging {
 public:
  explicit DualAveraging(double delta) : delta_(delta) {}
  void set_mu(double mu) { mu_ = mu; }
  void restart() {
    counter_ = 0;
    s_bar_ = 0.0;
    x_bar_ = 0.0;
  }
  void learn(double& epsilon, double accept_stat) {
    ++counter_;
    accept_stat = std::min(1.0, accept_stat);
    const double eta = 1.0 / (counter_ + t0_);
    s_bar_ = (1.0 - eta) * s_bar_ + eta * (delta_ - accept_stat);
    const double x = mu_ - s_bar_ * std::sqrt(counter_) / gamma_;
    const double x_eta = std::pow(counter_, -kappa_);
    x_bar_ = (1.0 - x_eta) * x_bar_ + x_eta * x;
    epsilon = std::exp(x);
  }
  void complete(double& epsilon) const { epsilon = std::exp(x_bar_); }

 private:
  double delta_;
  double mu_ = std::log(10.0);
  double gamma_ = 0.05;
  double kappa_ = 0.75;
  double t0_ = 10.0;
  double counter_ = 0.0;
  double s_bar_ = 0.0;
  double x_bar_ = 0.0;
};

// Expanding-window schedule for the diagonal metric: an initial fast buffer,
// doubling slow windows, and a terminal fast buffer.
class VarianceAdaptation {
 public:
  VarianceAdaptation(int dim, int num_warmup) : num_warmup_(num_warmup), mean_(VectorXd::Zero(dim)), m2_(VectorXd::Zero(dim)) {
    enabled_ = num_warmup >= 20;
    if (init_buffer_ + base_window_ + term_buffer_ > num_warmup) {
      init_buffer_ = static_cast<int>(0.15 * num_warmup);
      term_buffer_ = static_cast<int>(0.1 * num_warmup);
      base_window_ = num_warmup - (init_buffer_ + term_buffer_);
    }
    window_size_ = base_window_;
    next_window_ = init_buffer_ + window_size_ - 1;
  }

  // Returns true when the metric was updated.
  bool learn(VectorXd& inv_metric, const VectorXd& q) {
    if (!enabled_) return false;
    if (in_window()) add(q);
    if (end_of_window()) {
      compute_next_window();
      const double n = static_cast<double>(n_);
      VectorXd var = m2_ / (n - 1.0);
      inv_metric = (n / (n + 5.0)) * var.array() + 1e-3 * (5.0 / (n + 5.0));
      n_ = 0;
      mean_.setZero();
      m2_.setZero();
      ++counter_;
      return true;
    }
    ++counter_;
    return false;
  }

 private:
  bool in_window() const {
    return counter_ >= init_buffer_ && counter_ < num_warmup_ - term_buffer_ && counter_ != num_warmup_;
  }
  bool end_of_window() const { return counter_ == next_window_ && counter_ != num_warmup_; }
  void compute_next_window() {
    if (next_window_ == num_warmup_ - term_buffer_ - 1) return;
    window_size_ *= 2;
    next_window_ = counter_ + window_size_;
    if (next_window_ != num_warmup_ - term_buffer_ - 1) {
      const int boundary = next_window_ + 2 * window_size_;
      if (boundary >= num_warmup_ - term_buffer_) next_window_ = num_warmup_ - term_buffer_ - 1;
    }
  }
  void add(const VectorXd& q) {
    ++n_;
    const VectorXd delta = q - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_.array() += delta.array() * (q - mean_).array();
  }

  int num_warmup_;
  bool enabled_ = true;
  int init_buffer_ = 75;
  int term_buffer_ = 50;
  int base_window_ = 25;
  int window_size_ = 0;
  int next_window_ = 0;
  int counter_ = 0;
  long n_ = 0;
  VectorXd mean_;
  VectorXd m2_;
};

struct TransitionInfo {
  double accept_stat = 0.0;
  int depth = 0;
  int n_leapfrog = 0;
  bool divergent = false;
};

class NutsChain {
 public:
  NutsChain(const LogDensityGradient& target, int dim, const SamplerConfig& cfg, Engine rng)
      : inv_metric_(VectorXd::Ones(dim)),
        target_(target),
        max_depth_(cfg.max_tree_depth),
        max_delta_h_(cfg.max_energy_error),
        rng_(std::move(rng)) {}

  void evaluate(PhasePoint& z) const {
    z.g.resize(z.q.size());
    z.logp = target_(std::span<const double>(z.q.data(), static_cast<std::size_t>(z.q.size())),
                     std::span<double>(z.g.data(), static_cast<std::size_t>(z.g.size())));
    if (std::isnan(z.logp)) z.logp = -kInf;
  }

  double hamiltonian(const PhasePoint& z) const {
    const double h = -z.logp + 0.5 * (z.p.array().square() * inv_metric_.array()).sum();
    return std::isnan(h) ? kInf : h;
  }

  VectorXd dtau_dp(const PhasePoint& z) const { return inv_metric_.cwiseProduct(z.p); }

  void sample_momentum(PhasePoint& z) {
    z.p.resize(z.q.size());
    for (Eigen::Index i = 0; i < z.p.size(); ++i) z.p[i] = normal_(rng_) / std::sqrt(inv_metric_[i]);
  }

  void leapfrog(PhasePoint& z, double eps) const {
    z.p += 0.5 * eps * z.g;
    z.q += eps * inv_metric_.cwiseProduct(z.p);
    evaluate(z);
    z.p += 0.5 * eps * z.g;
  }

  void init_stepsize(PhasePoint& z) {
    if (epsilon_ == 0.0 || epsilon_ > 1e7 || std::isnan(epsilon_)) return;
    const PhasePoint z_init = z;
    sample_momentum(z);
    double h0 = hamiltonian(z);
    leapfrog(z, epsilon_);
    double delta_h = h0 - hamiltonian(z);
    const int direction = delta_h > std::log(0.8) ? 1 : -1;
    while (true) {
      z = z_init;
      sample_momentum(z);
      h0 = hamiltonian(z);
      leapfrog(z, epsilon_);
      delta_h = h0 - hamiltonian(z);
      if (direction == 1 && !(delta_h > std::log(0.8))) break;
      if (direction == -1 && !(delta_h < std::log(0.8))) break;
      epsilon_ = direction == 1 ? 2.0 * epsilon_ : 0.5 * epsilon_;
      if (epsilon_ > 1e7) throw std::runtime_error("step size search diverged; posterior may be improper");
      if (epsilon_ == 0.0) throw std::runtime_error("step size collapsed to zero; check the gradient");
    }
    z = z_init;
  }

  TransitionInfo transition(PhasePoint& z) {
    sample_momentum(z);
    divergent_ = false;

    PhasePoint z_fwd = z;
    PhasePoint z_bck = z;
    PhasePoint z_sample = z;
    PhasePoint z_propose = z;

    VectorXd p_fwd_fwd = z.p, p_fwd_bck = z.p, p_bck_fwd = z.p, p_bck_bck = z.p;
    VectorXd p_sharp_fwd_fwd = dtau_dp(z);
    VectorXd p_sharp_fwd_bck = p_sharp_fwd_fwd, p_sharp_bck_fwd = p_sharp_fwd_fwd,
             p_sharp_bck_bck = p_sharp_fwd_fwd;
    VectorXd rho = z.p;

    double log_sum_weight = 0.0;
    const double h0 = hamiltonian(z);
    int n_leapfrog = 0;
    double sum_metro_prob = 0.0;
    int depth = 0;
    PhasePoint cur = z;

    while (depth < max_depth_) {
      VectorXd rho_fwd = VectorXd::Zero(rho.size());
      VectorXd rho_bck = VectorXd::Zero(rho.size());
      bool valid_subtree = false;
      double log_sum_weight_subtree = -kInf;

      if (uniform_(rng_) > 0.5) {
        cur = z_fwd;
        rho_bck = rho;
        p_bck_fwd = p_fwd_bck;
        p_sharp_bck_fwd = p_sharp_fwd_bck;
        valid_subtree = build_tree(cur, depth, z_propose, p_sharp_fwd_bck, p_sharp_fwd_fwd, rho_fwd, p_fwd_bck,
                                   p_fwd_fwd, h0, 1.0, n_leapfrog, log_sum_weight_subtree, sum_metro_prob);
        z_fwd = cur;
      } else {
        cur = z_bck;
        rho_fwd = rho;
        p_fwd_bck = p_bck_fwd;
        p_sharp_fwd_bck = p_sharp_bck_fwd;
        valid_subtree = build_tree(cur, depth, z_propose, p_sharp_bck_fwd, p_sharp_bck_bck, rho_bck, p_bck_fwd,
                                   p_bck_bck, h0, -1.0, n_leapfrog, log_sum_weight_subtree, sum_metro_prob);
        z_bck = cur;
      }
      if (!valid_subtree) break;
      ++depth;

      if (log_sum_weight_subtree > log_sum_weight) {
        z_sample = z_propose;
      } else if (uniform_(rng_) < std::exp(log_sum_weight_subtree - log_sum_weight)) {
        z_sample = z_propose;
      }
      log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);

      rho = rho_bck + rho_fwd;
      bool persist = criterion(p_sharp_bck_bck, p_sharp_fwd_fwd, rho);
      VectorXd rho_extended = rho_bck + p_fwd_bck;
      persist = persist && criterion(p_sharp_bck_bck, p_sharp_fwd_bck, rho_extended);
      rho_extended = rho_fwd + p_bck_fwd;
      persist = persist && criterion(p_sharp_bck_fwd, p_sharp_fwd_fwd, rho_extended);
      if (!persist) break;
    }

    z = z_sample;
    TransitionInfo info;
    info.n_leapfrog = n_leapfrog;
    info.depth = depth;
    info.divergent = divergent_;
    info.accept_stat = n_leapfrog > 0 ? sum_metro_prob / n_leapfrog : 0.0;
    return info;
  }

  double epsilon_ = 1.0;
  VectorXd inv_metric_;

 private:
  static bool criterion(const VectorXd& p_sharp_minus, const VectorXd& p_sharp_plus, const VectorXd& rho) {
    return p_sharp_plus.dot(rho) > 0.0 && p_sharp_minus.dot(rho) > 0.0;
  }

  bool build_tree(PhasePoint& cur, int depth, PhasePoint& z_propose, VectorXd& p_sharp_beg, VectorXd& p_sharp_end,
                  VectorXd& rho, VectorXd& p_beg, VectorXd& p_end, double h0, double sign, int& n_leapfrog,
                  double& log_sum_weight, double& sum_metro_prob) {
    if (depth == 0) {
      leapfrog(cur, sign * epsilon_);
      ++n_leapfrog;
      const double h = hamiltonian(cur);
      if (h - h0 > max_delta_h_) divergent_ = true;
      log_sum_weight = log_sum_exp(log_sum_weight, h0 - h);
      sum_metro_prob += h0 - h > 0.0 ? 1.0 : std::exp(h0 - h);
      z_propose = cur;
      p_sharp_beg = dtau_dp(cur);
      p_sharp_end = p_sharp_beg;
      rho += cur.p;
      p_beg = cur.p;
      p_end = p_beg;
      return !divergent_;
    }

    // Initial subtree.
    VectorXd p_init_end(cur.q.size());
    VectorXd p_sharp_init_end(cur.q.size());
    VectorXd rho_init = VectorXd::Zero(rho.size());
    double log_sum_weight_init = -kInf;
    if (!build_tree(cur, depth - 1, z_propose, p_sharp_beg, p_sharp_init_end, rho_init, p_beg, p_init_end, h0, sign,
                    n_leapfrog, log_sum_weight_init, sum_metro_prob))
      return false;

    // Final subtree.
    PhasePoint z_propose_final = cur;
    VectorXd p_final_beg(cur.q.size());
    VectorXd p_sharp_final_beg(cur.q.size());
    VectorXd rho_final = VectorXd::Zero(rho.size());
    double log_sum_weight_final = -kInf;
    if (!build_tree(cur, depth - 1, z_propose_final, p_sharp_final_beg, p_sharp_end, rho_final, p_final_beg, p_end,
                    h0, sign, n_leapfrog, log_sum_weight_final, sum_metro_prob))
      return false;

    // Multinomial sample from the right subtree.
    const double log_sum_weight_subtree = log_sum_exp(log_sum_weight_init, log_sum_weight_final);
    log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);
    if (log_sum_weight_final > log_sum_weight_subtree) {
      z_propose = z_propose_final;
    } else if (uniform_(rng_) < std::exp(log_sum_weight_final - log_sum_weight_subtree)) {
      z_propose = z_propose_final;
    }

    const VectorXd rho_subtree = rho_init + rho_final;
    rho += rho_subtree;
    bool persist = criterion(p_sharp_beg, p_sharp_end, rho_subtree);
    VectorXd rho_extended = rho_init + p_final_beg;
    persist = persist && criterion(p_sharp_beg, p_sharp_final_beg, rho_extended);
    rho_extended = rho_final + p_init_end;
    persist = persist && criterion(p_sharp_init_end, p_sharp_end, rho_extended);
    return persist;
  }

  const LogDensityGradient& target_;
  int max_depth_;
  double max_delta_h_;
  bool divergent_ = false;
  Engine rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

void run_chain(const LogDensityGradient& target, int dim, const SamplerConfig& cfg, int chain,
               const std::vector<double>& init, PosteriorDraws& out) {
  NutsChain nuts(target, dim, cfg, make_engine(cfg.seed, {0x6e757473ULL, static_cast<std::uint64_t>(chain)}));
  PhasePoint z;
  z.q = Eigen::Map<const VectorXd>(init.data(), dim);
  nuts.evaluate(z);

  nuts.init_stepsize(z);
  DualAveraging stepsize(cfg.target_accept);
  stepsize.set_mu(std::log(10.0 * nuts.epsilon_));
  VarianceAdaptation metric(dim, cfg.warmup);

  auto& stats = out.chain_stats[static_cast<std::size_t>(chain)];
  double accept_sum = 0.0;
  double depth_sum = 0.0;
  const int retained = cfg.retained_per_chain();

  for (int it = 0; it < cfg.iterations; ++it) {
    const bool warm = it < cfg.warmup;
    const auto info = nuts.transition(z);
    stats.leapfrog_steps += info.n_leapfrog;
    if (warm) {
      if (info.divergent) ++stats.warmup_divergences;
      stepsize.learn(nuts.epsilon_, info.accept_stat);
      if (metric.learn(nuts.inv_metric_, z.q)) {
        nuts.init_stepsize(z);
        stepsize.set_mu(std::log(10.0 * nuts.epsilon_));
        stepsize.restart();
      }
      if (it == cfg.warmup - 1) stepsize.complete(nuts.epsilon_);
      continue;
    }
    const int d = it - cfg.warmup;
    auto row = out.draws.row(chain, d);
    std::copy(z.q.data(), z.q.data() + dim, row.begin());
    out.divergent[static_cast<std::size_t>(chain) * static_cast<std::size_t>(retained) + static_cast<std::size_t>(d)] =
        info.divergent ? 1 : 0;
    if (info.divergent) ++stats.divergences;
    if (info.depth >= cfg.max_tree_depth) ++stats.max_depth_hits;
    accept_sum += info.accept_stat;
    depth_sum += info.depth;
  }
  stats.step_size = nuts.epsilon_;
  stats.inverse_metric.assign(nuts.inv_metric_.data(), nuts.inv_metric_.data() + dim);
  stats.mean_accept_stat = accept_sum / retained;
  stats.mean_tree_depth = depth_sum / retained;
}

}  // namespace

PosteriorDraws run_nuts(const LogDensityGradient& target, int dimension, const SamplerConfig& config,
                        const std::vector<std::vector<double>>& inits) {
  config.validate();
  if (dimension < 1) throw std::invalid_argument("dimension must be positive");
  if (static_cast<int>(inits.size()) != config.chains)
    throw std::invalid_argument("one initial point per chain is required");

  // Chains whose starting point is rejected borrow the first usable one.
  std::vector<std::vector<double>> starts = inits;
  std::vector<double> grad(static_cast<std::size_t>(dimension));
  int first_ok = -1;
  std::vector<bool> ok(starts.size());
  for (std::size_t c = 0; c < starts.size(); ++c) {
    if (static_cast<int>(starts[c].size()) != dimension) throw std::invalid_argument("initial point has wrong length");
    const double lp = target(starts[c], grad);
    bool finite = std::isfinite(lp);
    for (double g : grad) finite = finite && std::isfinite(g);
    ok[c] = finite;
    if (finite && first_ok < 0) first_ok = static_cast<int>(c);
  }
  if (first_ok < 0) throw InitializationError("log density is not finite at any initial point");
  for (std::size_t c = 0; c < starts.size(); ++c)
    if (!ok[c]) starts[c] = starts[static_cast<std::size_t>(first_ok)];

  PosteriorDraws out;
  const int retained = config.retained_per_chain();
  out.draws = DrawArray(config.chains, retained, dimension);
  out.divergent.assign(static_cast<std::size_t>(config.chains) * static_cast<std::size_t>(retained), 0);
  out.chain_stats.resize(static_cast<std::size_t>(config.chains));

  const int n_threads = std::min(config.threads, config.chains);
  if (n_threads <= 1) {
    for (int c = 0; c < config.chains; ++c) run_chain(target, dimension, config, c, starts[static_cast<std::size_t>(c)], out);
  } else {
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(config.chains));
    std::vector<std::thread> workers;
    for (int t = 0; t < n_threads; ++t) {
      workers.emplace_back([&] {
        for (int c = next++; c < config.chains; c = next++) {
          try {
            run_chain(target, dimension, config, c, starts[static_cast<std::size_t>(c)], out);
          } catch (...) {
            errors[static_cast<std::size_t>(c)] = std::current_exception();
          }
        }
      });
    }
    for (auto& w : workers) w.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  for (const auto& s : out.chain_stats) out.divergence_count += s.divergences;
  out.rhat = split_rhat(out.draws);
  out.ess_bulk = ess_bulk(out.draws);
  return out;
}

}  // namespace dipper
