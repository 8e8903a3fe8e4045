#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dipper {

/// Raised for malformed input files. Carries the 1-based row and column of
/// the offending cell when one is known (row 1 is the header).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t row = 0, std::size_t column = 0);
  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

/// Missing or inconsistent columns in an input table.
class SchemaError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Data that parses but violates a domain invariant (negative counts,
/// non-positive read depth, degenerate covariates, too few samples).
class ValidationError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Sample x feature observation table with per-sample metadata.
///
/// `counts` may hold integer read counts or relative abundances; only the
/// zero / non-zero pattern matters for prevalence.
struct FeatureTable {
  std::vector<std::string> sample_ids;
  std::vector<std::string> feature_ids;
  Eigen::MatrixXd counts;  // N x K
  Eigen::VectorXd total_reads;
  std::vector<int> group;  // 0 = control, 1 = case
  std::vector<std::string> covariate_names;
  Eigen::MatrixXd covariates;  // N x M

  std::size_t n_samples() const { return sample_ids.size(); }
  std::size_t n_features() const { return feature_ids.size(); }
  std::size_t n_covariates() const { return covariate_names.size(); }

  /// Throws ValidationError if any invariant is broken.
  void validate() const;

  /// Rows selected by index, in the given order.
  FeatureTable select_samples(const std::vector<std::size_t>& rows) const;

  bool operator==(const FeatureTable& other) const;
};

enum class TableFormat { tsv, csv };

/// Names of the metadata columns. Every other column after the first
/// (sample id) column is a feature.
struct TableSchema {
  std::string group_column = "group";
  std::string reads_column = "total_reads";
  std::vector<std::string> covariate_columns;
};

TableFormat format_from_path(const std::filesystem::path& path);

FeatureTable ingest_table(const std::filesystem::path& path, TableFormat format,
                          const TableSchema& schema = {});
FeatureTable parse_table(std::string_view text, TableFormat format,
                         const TableSchema& schema = {});

/// Writes the table in the same layout `ingest_table` reads. Numbers use the
/// shortest representation that round-trips exactly.
std::string serialize_table(const FeatureTable& table, TableFormat format = TableFormat::tsv,
                            const TableSchema& schema = {});
void write_table(const std::filesystem::path& path, const FeatureTable& table,
                 TableFormat format = TableFormat::tsv, const TableSchema& schema = {});

/// presence(i, j) = 1 iff counts(i, j) > 0.
Eigen::MatrixXd derive_presence(const Eigen::MatrixXd& counts);

struct FilterResult {
  Eigen::MatrixXd presence;
  std::vector<std::size_t> kept_columns;
  std::vector<std::string> kept_ids;
};

/// Keeps the columns present in at least `min_present` samples, preserving
/// order. Throws ValidationError when nothing survives.
FilterResult filter_features(const Eigen::MatrixXd& presence,
                             const std::vector<std::string>& feature_ids, int min_present = 4);

/// Model-ready view of a table: presence/absence response plus the per-sample
/// design columns.
struct AnalysisInput {
  Eigen::MatrixXd presence;  // N x K, entries 0/1
  std::vector<int> group;
  Eigen::VectorXd log_reads_centered;
  std::vector<std::string> covariate_names;
  Eigen::MatrixXd covariates_std;  // N x M
  std::vector<bool> covariate_is_binary;
  std::vector<std::string> feature_ids;
  /// Relative abundances of the retained features (counts divided by the
  /// sample's total over all features). Used by the Gaussian likelihood.
  Eigen::MatrixXd rel_abundance;

  std::size_t n_samples() const { return group.size(); }
  std::size_t n_features() const { return feature_ids.size(); }
  std::size_t n_covariates() const { return covariate_names.size(); }

  /// Columns [1, group, log_reads_centered, covariates...].
  Eigen::MatrixXd design_matrix() const;
};

/// Derives presence, filters features (min_present) and builds the design
/// columns: centered log10 read depth, standardized continuous covariates
/// (sample sd, N-1 denominator) and 0/1 covariates passed through.
AnalysisInput build_design(const FeatureTable& table, int min_present = 4);

std::string analysis_input_to_json(const AnalysisInput& input);
AnalysisInput analysis_input_from_json(std::string_view json);

struct NullSplitSpec {
  std::string source_id;
  std::uint64_t seed = 0;
  int index = 0;
  int n_case = 0;
  int n_control = 0;
  std::vector<int> assignment;  // per source sample, 1 = pseudo-case
  bool balanced = false;
};

inline constexpr int kMinNullSamples = 20;
inline constexpr int kMinNullGroupSize = 10;

/// Random case/control partitions of a single-group table. Each split is
/// balanced with probability 1/2; otherwise the case size is uniform on
/// [10, N - 10]. Split `s` depends only on (seed, s).
std::vector<NullSplitSpec> make_null_splits(const FeatureTable& table, int n_splits,
                                            std::uint64_t seed,
                                            const std::string& source_id = "source");

/// Copy of `table` with its group column replaced by the split assignment.
FeatureTable apply_null_split(const FeatureTable& table, const NullSplitSpec& split);

}  // namespace dipper
