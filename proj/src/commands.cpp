#include "dipper/commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "dipper/fit.hpp"
#include "dipper/frequentist.hpp"
#include "dipper/report.hpp"
#include "dipper/text.hpp"

namespace dipper {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

const std::vector<std::string> kMethods = {"dipper", "dipper_gaussian", "wald", "lrt", "firth"};

std::string dataset_name(const std::string& path) { return fs::path(path).stem().string(); }

// Runs body(i) for i in [0, n) on up to `threads` workers. Each index writes
// only its own slot, so results do not depend on scheduling.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

FeatureTable load_table(const std::string& path, const RunConfig& cfg) {
  return ingest_table(path, format_from_path(path), cfg.schema);
}

FitOptions fit_options(const RunConfig& cfg, std::uint64_t seed, int chain_threads) {
  FitOptions o;
  o.family = cfg.method == "dipper_gaussian" ? LikelihoodFamily::gaussian : LikelihoodFamily::bernoulli_logit;
  o.prior = PriorConfig::preset(cfg.preset);
  o.parameterization = parameterization_from_string(cfg.parameterization);
  o.sampler.chains = cfg.chains;
  o.sampler.iterations = cfg.iterations;
  o.sampler.warmup = cfg.warmup;
  o.sampler.target_accept = cfg.target_accept;
  o.sampler.max_tree_depth = cfg.max_tree_depth;
  o.sampler.seed = seed;
  o.sampler.threads = chain_threads;
  return o;
}

// Outcome of analysing one table with the configured method.
struct Analysis {
  std::vector<ResultRow> rows;
  std::optional<DipperFit> fit;
  std::vector<TestResult> tests;
  bool converged = true;
};

Analysis analyse(const AnalysisInput& input, const RunConfig& cfg, std::uint64_t seed, int chain_threads) {
  Analysis a;
  if (cfg.bayesian()) {
    a.fit = fit_dipper(input, fit_options(cfg, seed, chain_threads));
    a.rows = rows_from_summaries(a.fit->summaries(cfg.alpha), cfg.method);
    a.converged = a.fit->converged();
  } else {
    FrequentistOptions fo;
    fo.firth.profile_ci = cfg.profile_ci;
    a.tests = run_frequentist_dpa(input, test_method_from_string(cfg.method), cfg.alpha, fo);
    a.rows = rows_from_tests(a.tests);
  }
  return a;
}

// Seed for the i-th dataset of a batch; splitmix64 keeps nearby indices apart.
std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void write_config_echo(const RunConfig& cfg, const std::string& command) {
  ordered_json echo;
  echo["command"] = command;
  const auto fields = ordered_json::parse(run_config_to_json(cfg));
  for (const auto& [key, value] : fields.items()) echo[key] = value;
  write_text_file(fs::path(cfg.out) / "config.json", echo.dump(2) + "\n");
}

ordered_json json_number(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

ordered_json json_optional(const std::optional<double>& v) { return v ? json_number(*v) : ordered_json(nullptr); }

}  // namespace

// ---------------------------------------------------------------------------
// Config

bool RunConfig::bayesian() const { return is_bayesian_method(method); }

void RunConfig::validate() const {
  if (std::find(kMethods.begin(), kMethods.end(), method) == kMethods.end())
    throw std::invalid_argument("unknown method '" + method + "' (expected dipper, dipper_gaussian, wald, lrt, firth)");
  const auto& presets = PriorConfig::preset_names();
  if (std::find(presets.begin(), presets.end(), preset) == presets.end())
    throw std::invalid_argument("unknown preset '" + preset + "'");
  if (!bayesian() && preset != "default")
    throw std::invalid_argument("prior presets apply only to the Bayesian methods (dipper, dipper_gaussian)");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  parameterization_from_string(parameterization);
  SamplerConfig s;
  s.chains = chains;
  s.iterations = iterations;
  s.warmup = warmup;
  s.target_accept = target_accept;
  s.max_tree_depth = max_tree_depth;
  s.threads = threads;
  s.validate();
  if (min_present < 1) throw std::invalid_argument("min_present must be at least 1");
  if (n_splits < 1) throw std::invalid_argument("n_splits must be at least 1");
  if (null_group != 0 && null_group != 1) throw std::invalid_argument("null_group must be 0 or 1");
  if (draws != "beta" && draws != "none") throw std::invalid_argument("draws must be 'beta' or 'none'");
  for (double a : alphas)
    if (!(a >= 0.0 && a < 1.0)) throw std::invalid_argument("sweep alphas must lie in [0, 1)");
  simulate.validate();
}

std::string run_config_to_json(const RunConfig& c) {
  ordered_json j;
  j["input"] = c.inputs;
  j["method"] = c.method;
  j["preset"] = c.preset;
  j["parameterization"] = c.parameterization;
  j["alpha"] = c.alpha;
  j["seed"] = c.seed;
  j["chains"] = c.chains;
  j["iterations"] = c.iterations;
  j["warmup"] = c.warmup;
  j["target_accept"] = c.target_accept;
  j["max_tree_depth"] = c.max_tree_depth;
  j["threads"] = c.threads;
  j["out"] = c.out;
  j["group_col"] = c.schema.group_column;
  j["reads_col"] = c.schema.reads_column;
  j["covariates"] = c.schema.covariate_columns;
  j["min_present"] = c.min_present;
  j["profile_ci"] = c.profile_ci;
  j["draws"] = c.draws;
  j["record_timing"] = c.record_timing;
  j["n_splits"] = c.n_splits;
  j["null_group"] = c.null_group;
  j["alphas"] = c.alphas;
  j["draws_a"] = c.draws_a;
  j["draws_b"] = c.draws_b;
  j["simulate"] = ordered_json::parse(synthetic_spec_to_json(c.simulate));
  j["simulate"].erase("seed");
  if (c.bayesian()) j["prior"] = ordered_json::parse(prior_config_to_json(PriorConfig::preset(c.preset)));
  return j.dump(2);
}

RunConfig run_config_from_json(std::string_view text, const RunConfig& base) {
  const auto j = nlohmann::json::parse(text);
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  RunConfig c = base;
  static const std::vector<std::string> known = {
      "input",     "method",     "preset",   "parameterization", "alpha",     "seed",       "chains",
      "iterations", "warmup",    "target_accept", "max_tree_depth", "threads", "out",       "group_col",
      "reads_col", "covariates", "min_present", "profile_ci",  "draws",     "record_timing", "n_splits",
      "null_group", "alphas",    "draws_a",  "draws_b",          "simulate",  "prior",      "command"};
  for (const auto& [key, value] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw std::invalid_argument("unknown config key '" + key + "'");
  if (j.contains("input")) {
    const auto& in = j.at("input");
    c.inputs = in.is_string() ? std::vector<std::string>{in.get<std::string>()} : in.get<std::vector<std::string>>();
  }
  c.method = j.value("method", c.method);
  c.preset = j.value("preset", c.preset);
  c.parameterization = j.value("parameterization", c.parameterization);
  c.alpha = j.value("alpha", c.alpha);
  c.seed = j.value("seed", c.seed);
  c.chains = j.value("chains", c.chains);
  c.iterations = j.value("iterations", c.iterations);
  c.warmup = j.value("warmup", c.warmup);
  c.target_accept = j.value("target_accept", c.target_accept);
  c.max_tree_depth = j.value("max_tree_depth", c.max_tree_depth);
  c.threads = j.value("threads", c.threads);
  c.out = j.value("out", c.out);
  c.schema.group_column = j.value("group_col", c.schema.group_column);
  c.schema.reads_column = j.value("reads_col", c.schema.reads_column);
  if (j.contains("covariates")) {
    const auto& cv = j.at("covariates");
    c.schema.covariate_columns =
        cv.is_string() ? std::vector<std::string>{cv.get<std::string>()} : cv.get<std::vector<std::string>>();
  }
  c.min_present = j.value("min_present", c.min_present);
  c.profile_ci = j.value("profile_ci", c.profile_ci);
  c.draws = j.value("draws", c.draws);
  c.record_timing = j.value("record_timing", c.record_timing);
  c.n_splits = j.value("n_splits", c.n_splits);
  c.null_group = j.value("null_group", c.null_group);
  if (j.contains("alphas")) c.alphas = j.at("alphas").get<std::vector<double>>();
  c.draws_a = j.value("draws_a", c.draws_a);
  c.draws_b = j.value("draws_b", c.draws_b);
  if (j.contains("simulate")) {
    auto merged = nlohmann::json::parse(synthetic_spec_to_json(c.simulate));
    merged.merge_patch(j.at("simulate"));
    c.simulate = synthetic_spec_from_json(merged.dump());
  }
  // "prior" is accepted for round-tripping the echo but is derived from the
  // preset; a custom prior block must agree with it.
  if (j.contains("prior") && c.bayesian()) {
    const auto expected = nlohmann::json::parse(prior_config_to_json(PriorConfig::preset(c.preset)));
    if (j.at("prior") != expected)
      throw std::invalid_argument("config 'prior' block does not match preset '" + c.preset + "'");
  }
  c.simulate.seed = c.seed;
  return c;
}

// ---------------------------------------------------------------------------
// run

int cmd_run(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  if (cfg.inputs.size() != 1) throw std::invalid_argument("run expects exactly one --input table");
  const auto t0 = std::chrono::steady_clock::now();
  const FeatureTable table = load_table(cfg.inputs[0], cfg);
  const AnalysisInput input = build_design(table, cfg.min_present);
  const Analysis a = analyse(input, cfg, cfg.seed, cfg.threads);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const fs::path out(cfg.out);
  write_results(out / "results.tsv", a.rows);

  ordered_json diag;
  diag["schema"] = "dipper.diagnostics.v1";
  diag["method"] = cfg.method;
  diag["n_samples"] = input.n_samples();
  diag["n_features_input"] = table.n_features();
  diag["n_features_tested"] = input.n_features();
  std::size_t n_sig = 0;
  for (const auto& r : a.rows) n_sig += r.significant ? 1 : 0;
  diag["n_significant"] = n_sig;
  ordered_json warnings = ordered_json::array();
  if (a.fit) {
    const auto& f = *a.fit;
    diag["rhat_threshold"] = kRhatThreshold;
    diag["max_rhat_beta"] = json_number(f.max_rhat_beta());
    diag["min_ess_bulk_beta"] = json_number(f.min_ess_beta());
    diag["divergences"] = f.divergence_count;
    diag["converged"] = f.converged();
    ordered_json chains = ordered_json::array();
    for (const auto& cs : f.chain_stats) {
      ordered_json c;
      c["step_size"] = cs.step_size;
      c["divergences"] = cs.divergences;
      c["mean_accept_stat"] = cs.mean_accept_stat;
      c["mean_tree_depth"] = cs.mean_tree_depth;
      c["max_depth_hits"] = cs.max_depth_hits;
      c["leapfrog_steps"] = cs.leapfrog_steps;
      chains.push_back(c);
    }
    diag["chains"] = chains;
    if (!(f.max_rhat_beta() < kRhatThreshold))
      warnings.push_back("max R-hat over effects is " + format_double(f.max_rhat_beta()) + " (threshold 1.02)");
    if (f.divergence_count > 0)
      warnings.push_back(std::to_string(f.divergence_count) + " divergent transitions after warmup");
    if (cfg.draws == "beta") write_beta_draws(out / "beta_draws.tsv", f);
  } else {
    ordered_json absent = ordered_json::array();
    for (const auto& t : a.tests)
      if (!t.p || !t.estimate) {
        ordered_json e;
        e["feature_id"] = t.feature_id;
        e["note"] = t.note;
        absent.push_back(e);
      }
    diag["absent_results"] = absent;
  }
  diag["warnings"] = warnings;
  if (cfg.record_timing) diag["wall_time_seconds"] = seconds;
  write_text_file(out / "diagnostics.json", diag.dump(2) + "\n");

  const std::string ds = dataset_name(cfg.inputs[0]);
  std::vector<PlotRecord> plot;
  plot.push_back({cfg.method, "n_significant", static_cast<double>(n_sig), ds});
  plot.push_back({cfg.method, "proportion_significant",
                  a.rows.empty() ? 0.0 : static_cast<double>(n_sig) / static_cast<double>(a.rows.size()), ds});
  for (const auto& r : a.rows)
    if (r.estimate) plot.push_back({cfg.method, "estimate:" + r.feature_id, *r.estimate, ds});
  write_plot_tsv(out / "plot.tsv", plot);
  write_config_echo(cfg, "run");

  for (const auto& w : warnings) log << "warning: " << w.get<std::string>() << '\n';
  log << "wrote " << a.rows.size() << " results (" << n_sig << " significant) to " << (out / "results.tsv").string()
      << '\n';
  return a.converged ? kExitOk : kExitConvergenceWarning;
}

// ---------------------------------------------------------------------------
// null-bench

int cmd_null_bench(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  if (cfg.inputs.empty()) throw std::invalid_argument("null-bench expects at least one --input table");

  struct Job {
    std::string source;
    NullSplitSpec split;
    const FeatureTable* table;
  };
  std::vector<FeatureTable> sources;
  sources.reserve(cfg.inputs.size());
  for (const auto& path : cfg.inputs) {
    const FeatureTable full = load_table(path, cfg);
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < full.n_samples(); ++i)
      if (full.group[i] == cfg.null_group) rows.push_back(i);
    if (rows.size() < static_cast<std::size_t>(kMinNullSamples))
      throw ValidationError("source '" + path + "' has " + std::to_string(rows.size()) + " samples in group " +
                            std::to_string(cfg.null_group) + "; null splits need at least " +
                            std::to_string(kMinNullSamples));
    sources.push_back(full.select_samples(rows));
  }
  std::vector<Job> jobs;
  for (std::size_t s = 0; s < sources.size(); ++s) {
    const std::string name = dataset_name(cfg.inputs[s]);
    for (auto& split : make_null_splits(sources[s], cfg.n_splits, cfg.seed, name))
      jobs.push_back({name, std::move(split), &sources[s]});
  }

  struct Outcome {
    std::size_t n_tested = 0;
    std::size_t n_significant = 0;
    bool converged = true;
    std::string note;
  };
  std::vector<Outcome> outcomes(jobs.size());
  parallel_for(jobs.size(), cfg.threads, [&](std::size_t i) {
    const auto& job = jobs[i];
    Outcome& o = outcomes[i];
    try {
      const auto input = build_design(apply_null_split(*job.table, job.split), cfg.min_present);
      const Analysis a = analyse(input, cfg, derived_seed(cfg.seed, i), 1);
      o.n_tested = a.rows.size();
      for (const auto& r : a.rows) o.n_significant += r.significant ? 1 : 0;
      o.converged = a.converged;
    } catch (const ValidationError& e) {
      o.note = e.what();  // e.g. no feature passes the prevalence filter
    }
  });

  std::vector<bool> flags;
  bool all_converged = true;
  for (const auto& o : outcomes) {
    flags.push_back(o.n_significant > 0);
    all_converged = all_converged && o.converged;
  }
  const auto report = null_error_rate(flags);

  const fs::path out(cfg.out);
  ordered_json j;
  j["schema"] = "dipper.null_report.v1";
  j["method"] = cfg.method;
  j["alpha"] = cfg.alpha;
  j["n_sources"] = sources.size();
  j["n_datasets"] = report.n_datasets;
  j["n_with_any_finding"] = report.n_with_any_finding;
  j["lambda"] = report.lambda;
  j["ci_level"] = 0.90;
  j["ci_low"] = report.ci_low;
  j["ci_high"] = report.ci_high;
  j["all_converged"] = all_converged;
  write_text_file(out / "null_report.json", j.dump(2) + "\n");

  std::ostringstream tsv;
  tsv << "#schema=dipper.null_splits.v1\n"
      << "source\tsplit\tseed\tn_case\tn_control\tbalanced\tn_tested\tn_significant\tany_finding\tconverged\tnote\n";
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& s = jobs[i].split;
    const auto& o = outcomes[i];
    tsv << jobs[i].source << '\t' << s.index << '\t' << s.seed << '\t' << s.n_case << '\t' << s.n_control << '\t'
        << (s.balanced ? "true" : "false") << '\t' << o.n_tested << '\t' << o.n_significant << '\t'
        << (o.n_significant > 0 ? "true" : "false") << '\t' << (o.converged ? "true" : "false") << '\t' << o.note
        << '\n';
  }
  write_text_file(out / "null_splits.tsv", tsv.str());

  std::vector<PlotRecord> plot;
  plot.push_back({cfg.method, "lambda", report.lambda, "corpus"});
  plot.push_back({cfg.method, "lambda_ci_low", report.ci_low, "corpus"});
  plot.push_back({cfg.method, "lambda_ci_high", report.ci_high, "corpus"});
  for (std::size_t i = 0; i < jobs.size(); ++i)
    plot.push_back({cfg.method, "n_significant", static_cast<double>(outcomes[i].n_significant),
                    jobs[i].source + "#" + std::to_string(jobs[i].split.index)});
  write_plot_tsv(out / "plot.tsv", plot);
  write_config_echo(cfg, "null-bench");

  log << "lambda = " << format_double(report.lambda) << " over " << report.n_datasets << " null datasets (90% CI "
      << format_double(report.ci_low) << " to " << format_double(report.ci_high) << ")\n";
  return all_converged ? kExitOk : kExitConvergenceWarning;
}

// ---------------------------------------------------------------------------
// replicate

namespace {

RescorableResults rescorable(const std::vector<ResultRow>& rows, const std::string& path,
                             const std::string& draws_path) {
  RescorableResults r;
  if (rows.empty()) {
    r.method = "none";
    return r;
  }
  r.method = rows.front().method;
  for (const auto& row : rows)
    if (row.method != r.method) throw SchemaError("results file '" + path + "' mixes methods");
  r.bayesian = is_bayesian_method(r.method);
  std::map<std::string, std::vector<double>> draws;
  if (r.bayesian) {
    fs::path dp = draws_path.empty() ? fs::path(path).parent_path() / "beta_draws.tsv" : fs::path(draws_path);
    if (fs::exists(dp)) draws = read_beta_draws(dp);
  }
  for (const auto& row : rows) {
    RescorableResult f;
    f.feature_id = row.feature_id;
    f.estimate = row.estimate;
    f.q = row.q;
    if (auto it = draws.find(row.feature_id); it != draws.end()) f.draws = it->second;
    r.features.push_back(std::move(f));
  }
  return r;
}

// "<directory>/<stem>", which tells apart the usual <out>/results.tsv files.
std::string result_label(const std::string& path) {
  const fs::path p(path);
  return (p.parent_path().filename() / p.stem()).generic_string();
}

std::vector<SignificanceCall> stored_calls(const std::vector<ResultRow>& rows) {
  std::vector<SignificanceCall> calls;
  for (const auto& row : rows) {
    if (!row.estimate || *row.estimate == 0.0) continue;
    calls.push_back({row.feature_id, *row.estimate > 0.0 ? Direction::positive : Direction::negative,
                     row.significant, row.method, 0.0});
  }
  return calls;
}

}  // namespace

int cmd_replicate(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  if (cfg.inputs.size() != 2) throw std::invalid_argument("replicate expects two results files");
  const auto rows_a = read_results(cfg.inputs[0]);
  const auto rows_b = read_results(cfg.inputs[1]);
  const std::string pair_id = result_label(cfg.inputs[0]) + "~" + result_label(cfg.inputs[1]);
  auto report = replication_counts(stored_calls(rows_a), stored_calls(rows_b), pair_id);
  const auto ra = rescorable(rows_a, cfg.inputs[0], cfg.draws_a);
  const auto rb = rescorable(rows_b, cfg.inputs[1], cfg.draws_b);
  report.curve = alpha_sweep(ra, rb, cfg.alphas);

  const auto imbalance_a = direction_imbalance(stored_calls(rows_a));
  const auto imbalance_b = direction_imbalance(stored_calls(rows_b));

  const fs::path out(cfg.out);
  ordered_json j;
  j["schema"] = "dipper.replication.v1";
  j["results_a"] = cfg.inputs[0];
  j["results_b"] = cfg.inputs[1];
  j["method_a"] = ra.method;
  j["method_b"] = rb.method;
  j["n_replicated"] = report.n_replicated;
  j["n_conflicting"] = report.n_conflicting;
  j["replicated"] = report.replicated;
  j["conflicting"] = report.conflicting;
  ordered_json curve = ordered_json::array();
  for (const auto& p : report.curve) {
    ordered_json c;
    c["alpha"] = p.alpha;
    c["replicated"] = p.replicated;
    c["conflicting"] = p.conflicting;
    curve.push_back(c);
  }
  j["alpha_sweep"] = curve;
  auto imbalance_json = [](const DirectionImbalance& d) {
    ordered_json x;
    x["n_positive"] = d.n_positive;
    x["n_negative"] = d.n_negative;
    x["majority_proportion"] = json_optional(d.proportion);
    return x;
  };
  j["direction_a"] = imbalance_json(imbalance_a);
  j["direction_b"] = imbalance_json(imbalance_b);
  write_text_file(out / "replication.json", j.dump(2) + "\n");

  std::ostringstream tsv;
  tsv << "#schema=dipper.alpha_sweep.v1\nalpha\treplicated\tconflicting\n";
  for (const auto& p : report.curve) tsv << format_double(p.alpha) << '\t' << p.replicated << '\t' << p.conflicting << '\n';
  write_text_file(out / "alpha_sweep.tsv", tsv.str());

  std::vector<PlotRecord> plot;
  const std::string method = ra.method == rb.method ? ra.method : ra.method + "|" + rb.method;
  plot.push_back({method, "replicated", static_cast<double>(report.n_replicated), pair_id});
  plot.push_back({method, "conflicting", static_cast<double>(report.n_conflicting), pair_id});
  for (const auto& p : report.curve) {
    plot.push_back({method, "replicated@" + format_double(p.alpha), static_cast<double>(p.replicated), pair_id});
    plot.push_back({method, "conflicting@" + format_double(p.alpha), static_cast<double>(p.conflicting), pair_id});
  }
  write_plot_tsv(out / "plot.tsv", plot);
  write_config_echo(cfg, "replicate");

  log << "replicated " << report.n_replicated << ", conflicting " << report.n_conflicting << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate

int cmd_simulate(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  SyntheticSpec spec = cfg.simulate;
  spec.seed = cfg.seed;
  const auto data = generate_synthetic(spec);
  const fs::path out(cfg.out);
  write_table(out / "table.tsv", data.table);

  std::ostringstream truth;
  truth << "#schema=dipper.truth.v1\nfeature_id\talpha\tbeta\tnonnull\n";
  for (std::size_t j = 0; j < data.truth.feature_ids.size(); ++j)
    truth << data.truth.feature_ids[j] << '\t' << format_double(data.truth.alpha[j]) << '\t'
          << format_double(data.truth.beta[j]) << '\t' << (data.truth.nonnull[j] ? "true" : "false") << '\n';
  write_text_file(out / "truth.tsv", truth.str());

  ordered_json j;
  j["schema"] = "dipper.simulation.v1";
  j["spec"] = ordered_json::parse(synthetic_spec_to_json(spec));
  j["n_samples"] = data.table.n_samples();
  j["n_features"] = data.table.n_features();
  std::size_t nonnull = 0;
  for (bool b : data.truth.nonnull) nonnull += b ? 1 : 0;
  j["n_nonnull"] = nonnull;
  write_text_file(out / "simulation.json", j.dump(2) + "\n");
  write_config_echo(cfg, "simulate");
  log << "wrote " << data.table.n_samples() << " x " << data.table.n_features() << " table to "
      << (out / "table.tsv").string() << '\n';
  return kExitOk;
}

int run_command(std::string_view name, const RunConfig& config, std::ostream& log) {
  try {
    if (name == "run") return cmd_run(config, log);
    if (name == "null-bench") return cmd_null_bench(config, log);
    if (name == "replicate") return cmd_replicate(config, log);
    if (name == "simulate") return cmd_simulate(config, log);
    log << "error: unknown command '" << name << "'\n";
    return kExitInputError;
  } catch (const ParseError& e) {
    log << "input error: " << e.what();
    if (e.row()) log << " (row " << e.row() << ", column " << e.column() << ")";
    log << '\n';
    return kExitInputError;
  } catch (const SchemaError& e) {
    log << "schema error: " << e.what() << '\n';
    return kExitInputError;
  } catch (const ValidationError& e) {
    log << "input error: " << e.what() << '\n';
    return kExitInputError;
  } catch (const CapabilityError& e) {
    log << "input error: " << e.what() << '\n';
    return kExitInputError;
  } catch (const nlohmann::json::exception& e) {
    log << "config error: " << e.what() << '\n';
    return kExitInputError;
  } catch (const std::invalid_argument& e) {
    log << "input error: " << e.what() << '\n';
    return kExitInputError;
  } catch (const std::exception& e) {
    log << "internal error: " << e.what() << '\n';
    return kExitInternalError;
  }
}

}  // namespace dipper
