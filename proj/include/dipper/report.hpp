#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dipper/fit.hpp"
#include "dipper/frequentist.hpp"
#include "dipper/summary.hpp"

namespace dipper {

inline constexpr const char* kResultsSchema = "dipper.results.v1";
inline constexpr const char* kDrawsSchema = "dipper.draws.v1";
inline constexpr const char* kPlotSchema = "dipper.plot.v1";

/// One row of the results TSV. Frequentist rows carry se/p/q; Bayesian rows
/// leave them empty and report the posterior median with its interval.
struct ResultRow {
  std::string feature_id;
  std::string method;
  std::optional<double> estimate;
  std::optional<double> se;
  std::optional<double> ci_low;
  std::optional<double> ci_high;
  std::optional<double> p;
  std::optional<double> q;
  bool significant = false;

  bool operator==(const ResultRow&) const = default;
};

std::vector<ResultRow> rows_from_tests(const std::vector<TestResult>& results);
std::vector<ResultRow> rows_from_summaries(const std::vector<FeatureSummary>& summaries, const std::string& method);

/// Methods whose significance comes from posterior intervals.
bool is_bayesian_method(const std::string& method);

std::string serialize_results(const std::vector<ResultRow>& rows);
std::vector<ResultRow> parse_results(std::string_view text);
void write_results(const std::filesystem::path& path, const std::vector<ResultRow>& rows);
/// Throws SchemaError if the header line or columns do not match the
/// declared schema version.
std::vector<ResultRow> read_results(const std::filesystem::path& path);

/// Long-format draws (chain, iteration, parameter, value) of the effects
/// beta_j, one line per draw.
void write_beta_draws(const std::filesystem::path& path, const DipperFit& fit);
/// Pooled draws per feature id, in chain-then-iteration order.
std::map<std::string, std::vector<double>> read_beta_draws(const std::filesystem::path& path);

struct PlotRecord {
  std::string method;
  std::string metric;
  double value = 0.0;
  std::string dataset;
};

void write_plot_tsv(const std::filesystem::path& path, const std::vector<PlotRecord>& records);

/// Writes `text` exactly, creating parent directories.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace dipper
