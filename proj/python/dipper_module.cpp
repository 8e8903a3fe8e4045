#include <optional>
#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dipper/benchmark.hpp"
#include "dipper/commands.hpp"
#include "dipper/fit.hpp"
#include "dipper/frequentist.hpp"
#include "dipper/model.hpp"
#include "dipper/report.hpp"

namespace py = pybind11;
using namespace dipper;

namespace {

AnalysisInput make_input(const Eigen::MatrixXd& counts, const Eigen::VectorXd& total_reads,
                         const std::vector<int>& group, const std::optional<Eigen::MatrixXd>& covariates,
                         std::vector<std::string> feature_ids, int min_present) {
  FeatureTable t;
  t.counts = counts;
  t.total_reads = total_reads;
  t.group = group;
  for (Eigen::Index i = 0; i < counts.rows(); ++i) t.sample_ids.push_back("s" + std::to_string(i + 1));
  if (feature_ids.empty())
    for (Eigen::Index j = 0; j < counts.cols(); ++j) feature_ids.push_back("f" + std::to_string(j + 1));
  t.feature_ids = std::move(feature_ids);
  if (covariates) {
    t.covariates = *covariates;
    for (Eigen::Index c = 0; c < covariates->cols(); ++c) t.covariate_names.push_back("x" + std::to_string(c + 1));
  } else {
    t.covariates.resize(counts.rows(), 0);
  }
  t.validate();
  return build_design(t, min_present);
}

py::dict test_result_dict(const TestResult& r) {
  py::dict d;
  d["feature_id"] = r.feature_id;
  d["method"] = to_string(r.method);
  d["estimate"] = r.estimate;
  d["se"] = r.se;
  d["ci_low"] = r.ci_low;
  d["ci_high"] = r.ci_high;
  d["p"] = r.p;
  d["q"] = r.q;
  d["significant"] = r.significant;
  d["note"] = r.note;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Differential prevalence analysis: shrinkage model, NUTS sampler, logistic baselines, benchmarks";
  m.attr("__version__") = "0.1.0";

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<SchemaError>(m, "SchemaError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<DesignError>(m, "DesignError", PyExc_ValueError);
  py::register_exception<CapabilityError>(m, "CapabilityError", PyExc_RuntimeError);

  m.def("al_logpdf", &al_logpdf, py::arg("x"), py::arg("mu"), py::arg("tau"), py::arg("nu"),
        "Asymmetric Laplace log-density with P(X <= mu) = nu.");

  m.def(
      "bh_adjust", [](const std::vector<double>& p) { return bh_adjust(p); }, py::arg("p"),
      "Benjamini-Hochberg adjusted p-values in input order.");

  m.def(
      "logistic_test",
      [](const Eigen::VectorXd& y, const Eigen::MatrixXd& X, int coef, const std::string& method, double alpha) {
        switch (test_method_from_string(method)) {
          case TestMethod::wald: return test_result_dict(wald_test(irls_fit(y, X), coef, alpha));
          case TestMethod::lrt: return test_result_dict(lrt_test(y, X, coef, alpha));
          case TestMethod::firth: return test_result_dict(firth_plrt(y, X, coef, alpha));
        }
        throw std::logic_error("unreachable");
      },
      py::arg("y"), py::arg("X"), py::arg("coef") = 1, py::arg("method") = "wald", py::arg("alpha") = 0.10,
      "Test one coefficient of a logistic regression of y on the design X.");

  m.def(
      "frequentist_dpa",
      [](const Eigen::MatrixXd& counts, const Eigen::VectorXd& total_reads, const std::vector<int>& group,
         const std::string& method, double alpha, const std::optional<Eigen::MatrixXd>& covariates,
         const std::vector<std::string>& feature_ids, int min_present) {
        const auto in = make_input(counts, total_reads, group, covariates, feature_ids, min_present);
        py::list out;
        for (const auto& r : run_frequentist_dpa(in, test_method_from_string(method), alpha))
          out.append(test_result_dict(r));
        return out;
      },
      py::arg("counts"), py::arg("total_reads"), py::arg("group"), py::arg("method") = "wald",
      py::arg("alpha") = 0.10, py::arg("covariates") = py::none(), py::arg("feature_ids") = std::vector<std::string>{},
      py::arg("min_present") = 4,
      "Per-feature logistic tests of group on presence, BH-adjusted across features.");

  m.def(
      "fit_dipper",
      [](const Eigen::MatrixXd& counts, const Eigen::VectorXd& total_reads, const std::vector<int>& group,
         const std::string& preset, double alpha, int chains, int iterations, int warmup, std::uint64_t seed,
         const std::optional<Eigen::MatrixXd>& covariates, const std::vector<std::string>& feature_ids,
         int min_present) {
        const auto in = make_input(counts, total_reads, group, covariates, feature_ids, min_present);
        FitOptions o;
        o.prior = PriorConfig::preset(preset);
        o.sampler.chains = chains;
        o.sampler.iterations = iterations;
        o.sampler.warmup = warmup;
        o.sampler.seed = seed;
        DipperFit result;
        {
          py::gil_scoped_release release;
          result = fit_dipper(in, o);
        }
        py::list features;
        for (const auto& s : result.summaries(alpha)) {
          py::dict d;
          d["feature_id"] = s.feature_id;
          d["median"] = s.median;
          d["ci_low"] = s.ci_low;
          d["ci_high"] = s.ci_high;
          d["significant"] = s.significant;
          features.append(d);
        }
        py::dict out;
        out["features"] = features;
        out["feature_ids"] = result.feature_ids;
        out["max_rhat"] = result.max_rhat_beta();
        out["min_ess"] = result.min_ess_beta();
        out["divergences"] = result.divergence_count;
        out["converged"] = result.converged();
        std::vector<std::vector<double>> draws;
        for (int j = 0; j < result.layout.n_features; ++j) draws.push_back(result.beta_draws(j));
        out["beta_draws"] = draws;
        return out;
      },
      py::arg("counts"), py::arg("total_reads"), py::arg("group"), py::arg("preset") = "default",
      py::arg("alpha") = 0.10, py::arg("chains") = 4, py::arg("iterations") = 3000, py::arg("warmup") = 1000,
      py::arg("seed") = 1, py::arg("covariates") = py::none(), py::arg("feature_ids") = std::vector<std::string>{},
      py::arg("min_present") = 4, "Posterior summaries of the shrinkage model for a sample x feature table.");

  m.def(
      "simulate",
      [](const std::string& spec_json) {
        const auto data = generate_synthetic(synthetic_spec_from_json(spec_json.empty() ? "{}" : spec_json));
        py::dict out;
        out["sample_ids"] = data.table.sample_ids;
        out["feature_ids"] = data.table.feature_ids;
        out["counts"] = data.table.counts;
        out["total_reads"] = data.table.total_reads;
        out["group"] = data.table.group;
        out["alpha"] = data.truth.alpha;
        out["beta"] = data.truth.beta;
        out["nonnull"] = data.truth.nonnull;
        return out;
      },
      py::arg("spec_json") = "{}", "Synthetic presence table with known effects.");

  m.def(
      "run_command",
      [](const std::string& name, const std::string& config_json) {
        const RunConfig cfg = run_config_from_json(config_json);
        std::ostringstream log;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = run_command(name, cfg, log);
        }
        return py::make_tuple(code, log.str());
      },
      py::arg("name"), py::arg("config_json"),
      "Runs one command (run, null-bench, replicate, simulate) from a JSON config; returns (exit code, log).");

  m.def(
      "read_results",
      [](const std::string& path) {
        py::list out;
        for (const auto& r : read_results(path)) {
          py::dict d;
          d["feature_id"] = r.feature_id;
          d["method"] = r.method;
          d["estimate"] = r.estimate;
          d["se"] = r.se;
          d["ci_low"] = r.ci_low;
          d["ci_high"] = r.ci_high;
          d["p"] = r.p;
          d["q"] = r.q;
          d["significant"] = r.significant;
          out.append(d);
        }
        return out;
      },
      py::arg("path"), "Rows of a results TSV as dictionaries.");
}
