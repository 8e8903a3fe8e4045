// Command-line front end: parses flags and an optional JSON config, then
// hands the resolved RunConfig to the command layer.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dipper/commands.hpp"

namespace {

struct Flags {
  std::string config_path;
  std::vector<std::string> inputs;
  std::string method, preset, parameterization, out, group_col, reads_col, draws, draws_a, draws_b;
  std::vector<std::string> covariates;
  std::vector<double> alphas;
  double alpha = 0.0, target_accept = 0.0;
  std::uint64_t seed = 0;
  int chains = 0, iterations = 0, warmup = 0, max_tree_depth = 0, threads = 0, min_present = 0, n_splits = 0,
      null_group = 0;
  bool profile_ci = false, record_timing = false;
  // simulate
  int n_per_group = 0, n_features = 0;
  std::uint64_t replicate = 0;
  double fraction_nonnull = 0.0, effect_tau = 0.0, effect_nu = 0.0, reads_effect = 0.0;
  std::vector<double> prevalence_range, log10_reads_range;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config_path, "JSON config file; flags given on the command line override it");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--seed", f.seed, "Random seed");
  cmd->add_option("--threads", f.threads, "Worker threads (outputs do not depend on it)");
}

void add_analysis(CLI::App* cmd, Flags& f) {
  cmd->add_option("--input", f.inputs, "Input table(s), .tsv or .csv");
  cmd->add_option("--method", f.method, "dipper, dipper_gaussian, wald, lrt or firth");
  cmd->add_option("--preset", f.preset, "Prior preset: default, symm, skewed, wide, narrow");
  cmd->add_option("--alpha", f.alpha, "Significance level");
  cmd->add_option("--chains", f.chains, "Sampler chains");
  cmd->add_option("--iterations", f.iterations, "Iterations per chain, including warmup");
  cmd->add_option("--warmup", f.warmup, "Warmup iterations per chain");
  cmd->add_option("--target-accept", f.target_accept, "Step-size adaptation target");
  cmd->add_option("--max-tree-depth", f.max_tree_depth, "NUTS maximum tree depth");
  cmd->add_option("--parameterization", f.parameterization, "mixture, noncentered or centered");
  cmd->add_option("--group-col", f.group_col, "Case/control column (0/1)");
  cmd->add_option("--reads-col", f.reads_col, "Total read count column");
  cmd->add_option("--covariates", f.covariates, "Covariate columns")->delimiter(',');
  cmd->add_option("--min-present", f.min_present, "Minimum samples in which a feature must be present");
  cmd->add_flag("--profile-ci", f.profile_ci, "Profile penalized-likelihood intervals for firth");
  cmd->add_option("--draws", f.draws, "Posterior draw export: beta or none");
  cmd->add_flag("--record-timing", f.record_timing, "Include wall time in diagnostics (breaks byte identity)");
}

// JSON object with only the options the user actually passed.
nlohmann::json overrides(const CLI::App* cmd, const Flags& f) {
  nlohmann::json j;
  auto given = [&](const char* name) {
    const CLI::Option* opt = cmd->get_option_no_throw(name);
    return opt != nullptr && opt->count() > 0;
  };
  if (given("--input") || given("results")) j["input"] = f.inputs;
  if (given("--method")) j["method"] = f.method;
  if (given("--preset")) j["preset"] = f.preset;
  if (given("--parameterization")) j["parameterization"] = f.parameterization;
  if (given("--alpha")) j["alpha"] = f.alpha;
  if (given("--seed")) j["seed"] = f.seed;
  if (given("--chains")) j["chains"] = f.chains;
  if (given("--iterations")) j["iterations"] = f.iterations;
  if (given("--warmup")) j["warmup"] = f.warmup;
  if (given("--target-accept")) j["target_accept"] = f.target_accept;
  if (given("--max-tree-depth")) j["max_tree_depth"] = f.max_tree_depth;
  if (given("--threads")) j["threads"] = f.threads;
  if (given("--out")) j["out"] = f.out;
  if (given("--group-col")) j["group_col"] = f.group_col;
  if (given("--reads-col")) j["reads_col"] = f.reads_col;
  if (given("--covariates")) j["covariates"] = f.covariates;
  if (given("--min-present")) j["min_present"] = f.min_present;
  if (given("--profile-ci")) j["profile_ci"] = f.profile_ci;
  if (given("--draws")) j["draws"] = f.draws;
  if (given("--record-timing")) j["record_timing"] = f.record_timing;
  if (given("--n-splits")) j["n_splits"] = f.n_splits;
  if (given("--null-group")) j["null_group"] = f.null_group;
  if (given("--alphas")) j["alphas"] = f.alphas;
  if (given("--draws-a")) j["draws_a"] = f.draws_a;
  if (given("--draws-b")) j["draws_b"] = f.draws_b;
  nlohmann::json sim;
  if (given("--n-per-group")) sim["n_per_group"] = f.n_per_group;
  if (given("--n-features")) sim["n_features"] = f.n_features;
  if (given("--fraction-nonnull")) sim["fraction_nonnull"] = f.fraction_nonnull;
  if (given("--effect-tau")) sim["effect_tau"] = f.effect_tau;
  if (given("--effect-nu")) sim["effect_nu"] = f.effect_nu;
  if (given("--replicate")) sim["replicate"] = f.replicate;
  if (given("--reads-effect")) sim["reads_effect"] = f.reads_effect;
  if (given("--prevalence-range")) sim["prevalence_range"] = f.prevalence_range;
  if (given("--log10-reads-range")) sim["log10_reads_range"] = f.log10_reads_range;
  if (!sim.empty()) j["simulate"] = sim;
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differential prevalence analysis with a shrinkage prior"};
  app.require_subcommand(1);
  Flags f;

  auto* run = app.add_subcommand("run", "Analyse one table");
  add_common(run, f);
  add_analysis(run, f);

  auto* null = app.add_subcommand("null-bench", "Error rate on random splits of one group");
  add_common(null, f);
  add_analysis(null, f);
  null->add_option("--n-splits", f.n_splits, "Null splits per source table");
  null->add_option("--null-group", f.null_group, "Group whose samples are split (0 or 1)");

  auto* rep = app.add_subcommand("replicate", "Replicated and conflicting findings of two result files");
  add_common(rep, f);
  rep->add_option("--input", f.inputs, "Two results.tsv files")->expected(0, 2);
  rep->add_option("results", f.inputs, "Two results.tsv files")->expected(0, 2);
  rep->add_option("--alphas", f.alphas, "Significance levels for the sweep")->delimiter(',');
  rep->add_option("--draws-a", f.draws_a, "Posterior draws for the first file (Bayesian results)");
  rep->add_option("--draws-b", f.draws_b, "Posterior draws for the second file (Bayesian results)");

  auto* sim = app.add_subcommand("simulate", "Write a synthetic table and its ground truth");
  add_common(sim, f);
  sim->add_option("--n-per-group", f.n_per_group, "Samples per group");
  sim->add_option("--n-features", f.n_features, "Features");
  sim->add_option("--fraction-nonnull", f.fraction_nonnull, "Share of features with an effect");
  sim->add_option("--effect-tau", f.effect_tau, "Scale of the asymmetric Laplace effects");
  sim->add_option("--effect-nu", f.effect_nu, "P(effect <= 0)");
  sim->add_option("--replicate", f.replicate, "Sample-stream index; replicas share true effects");
  sim->add_option("--reads-effect", f.reads_effect, "Coefficient of centered log10 read depth");
  sim->add_option("--prevalence-range", f.prevalence_range, "Baseline prevalence interval")->expected(2)->delimiter(',');
  sim->add_option("--log10-reads-range", f.log10_reads_range, "log10 read depth interval")->expected(2)->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? dipper::kExitOk : dipper::kExitInputError;
  }

  CLI::App* cmd = app.get_subcommands().front();
  dipper::RunConfig cfg;
  try {
    nlohmann::json merged = nlohmann::json::object();
    if (!f.config_path.empty()) {
      std::ifstream in(f.config_path);
      if (!in) {
        std::cerr << "input error: cannot open config '" << f.config_path << "'\n";
        return dipper::kExitInputError;
      }
      std::stringstream ss;
      ss << in.rdbuf();
      merged = nlohmann::json::parse(ss.str());
      if (!merged.is_object()) throw std::invalid_argument("config must be a JSON object");
    }
    merged.merge_patch(overrides(cmd, f));
    cfg = dipper::run_config_from_json(merged.dump());
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return dipper::kExitInputError;
  }
  return dipper::run_command(cmd->get_name(), cfg, std::cerr);
}
