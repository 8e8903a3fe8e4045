#include "dipper/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "dipper/rng.hpp"
#include "dipper/text.hpp"

namespace dipper {

namespace {

std::string location(std::size_t row, std::size_t column) {
  return " (row " + std::to_string(row) + ", column " + std::to_string(column) + ")";
}

// Splits a CSV line, honouring double-quoted fields with "" escapes.
std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cell));
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  out.push_back(std::move(cell));
  return out;
}

std::vector<std::string> split_cells(std::string_view line, TableFormat format) {
  std::vector<std::string> cells;
  if (format == TableFormat::csv) {
    cells = split_csv(line);
  } else {
    for (auto piece : split_line(line, '\t')) cells.emplace_back(piece);
  }
  for (auto& c : cells) c = std::string(trim(c));
  return cells;
}

std::string quote_csv(const std::string& cell) {
  if (cell.find_first_of(",\"\n") == std::string::npos) return cell;
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

bool is_binary_column(const Eigen::VectorXd& col) {
  return (col.array() == 0.0 || col.array() == 1.0).all();
}

}  // namespace

ParseError::ParseError(const std::string& what, std::size_t row, std::size_t column)
    : std::runtime_error(row > 0 ? what + location(row, column) : what),
      row_(row),
      column_(column) {}

void FeatureTable::validate() const {
  const auto n = sample_ids.size();
  const auto k = feature_ids.size();
  if (static_cast<std::size_t>(counts.rows()) != n || static_cast<std::size_t>(counts.cols()) != k)
    throw ValidationError("counts matrix is " + std::to_string(counts.rows()) + "x" +
                          std::to_string(counts.cols()) + ", expected " + std::to_string(n) +
                          "x" + std::to_string(k));
  if (static_cast<std::size_t>(total_reads.size()) != n || group.size() != n)
    throw ValidationError("metadata length does not match the number of samples");
  if (static_cast<std::size_t>(covariates.rows()) != n ||
      static_cast<std::size_t>(covariates.cols()) != covariate_names.size())
    throw ValidationError("covariate matrix does not match covariate names");
  if (!(counts.array() >= 0.0).all() || !counts.allFinite())
    throw ValidationError("counts must be finite and non-negative");
  if (!(total_reads.array() > 0.0).all() || !total_reads.allFinite())
    throw ValidationError("total_reads must be strictly positive");
  for (int g : group)
    if (g != 0 && g != 1) throw ValidationError("group must contain only 0/1");
  std::unordered_set<std::string> seen;
  for (const auto& id : feature_ids)
    if (!seen.insert(id).second) throw ValidationError("duplicate feature id '" + id + "'");
}

FeatureTable FeatureTable::select_samples(const std::vector<std::size_t>& rows) const {
  FeatureTable out;
  out.feature_ids = feature_ids;
  out.covariate_names = covariate_names;
  const auto n = static_cast<Eigen::Index>(rows.size());
  out.counts.resize(n, counts.cols());
  out.total_reads.resize(n);
  out.covariates.resize(n, covariates.cols());
  for (Eigen::Index r = 0; r < n; ++r) {
    auto src = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)]);
    out.sample_ids.push_back(sample_ids.at(static_cast<std::size_t>(src)));
    out.group.push_back(group.at(static_cast<std::size_t>(src)));
    out.counts.row(r) = counts.row(src);
    out.total_reads[r] = total_reads[src];
    out.covariates.row(r) = covariates.row(src);
  }
  return out;
}

bool FeatureTable::operator==(const FeatureTable& o) const {
  return sample_ids == o.sample_ids && feature_ids == o.feature_ids && group == o.group &&
         covariate_names == o.covariate_names && counts == o.counts &&
         total_reads == o.total_reads && covariates == o.covariates;
}

TableFormat format_from_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".csv" ? TableFormat::csv : TableFormat::tsv;
}

FeatureTable ingest_table(const std::filesystem::path& path, TableFormat format,
                          const TableSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open input table '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_table(buf.str(), format, schema);
}

FeatureTable parse_table(std::string_view text, TableFormat format, const TableSchema& schema) {
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;  // (line number, cells)
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    ++line_no;
    if (line_no == 1 && line.substr(0, 3) == "\xEF\xBB\xBF") line.remove_prefix(3);
    if (!trim(line).empty() && line.front() != '#') rows.emplace_back(line_no, split_cells(line, format));
    if (end == text.size()) break;
    start = end + 1;
  }
  if (rows.empty()) throw SchemaError("input table is empty");

  const auto& header = rows.front().second;
  std::unordered_map<std::string, std::size_t> col_of;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c].empty() && c > 0)
      throw ParseError("empty column name", rows.front().first, c + 1);
    if (!col_of.emplace(header[c], c).second)
      throw SchemaError("duplicate column name '" + header[c] + "'");
  }
  auto require = [&](const std::string& name, const char* role) {
    auto it = col_of.find(name);
    if (it == col_of.end() || it->second == 0)
      throw SchemaError(std::string("missing ") + role + " column '" + name + "'");
    return it->second;
  };
  const auto group_col = require(schema.group_column, "group");
  const auto reads_col = require(schema.reads_column, "total_reads");
  std::vector<std::size_t> cov_cols;
  for (const auto& name : schema.covariate_columns) cov_cols.push_back(require(name, "covariate"));

  std::unordered_set<std::size_t> meta(cov_cols.begin(), cov_cols.end());
  meta.insert(group_col);
  meta.insert(reads_col);
  std::vector<std::size_t> feature_cols;
  for (std::size_t c = 1; c < header.size(); ++c)
    if (!meta.count(c)) feature_cols.push_back(c);

  FeatureTable t;
  t.covariate_names = schema.covariate_columns;
  for (auto c : feature_cols) t.feature_ids.push_back(header[c]);
  const auto n = static_cast<Eigen::Index>(rows.size() - 1);
  t.counts.resize(n, static_cast<Eigen::Index>(feature_cols.size()));
  t.total_reads.resize(n);
  t.covariates.resize(n, static_cast<Eigen::Index>(cov_cols.size()));

  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& [row_no, cells] = rows[static_cast<std::size_t>(i) + 1];
    if (cells.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " cells, found " +
                           std::to_string(cells.size()),
                       row_no, cells.size());
    auto number = [&, row_no = row_no](std::size_t c) {
      auto v = parse_double(cells[c]);
      if (!v || !std::isfinite(*v))
        throw ParseError("malformed numeric cell '" + cells[c] + "' in column '" + header[c] + "'",
                         row_no, c + 1);
      return *v;
    };
    t.sample_ids.push_back(cells[0]);
    const double g = number(group_col);
    if (g != 0.0 && g != 1.0)
      throw ParseError("group must be 0 or 1, found '" + cells[group_col] + "'", row_no, group_col + 1);
    t.group.push_back(static_cast<int>(g));
    const double reads = number(reads_col);
    if (!(reads > 0.0))
      throw ValidationError("total_reads must be positive, found '" + cells[reads_col] + "' at row " +
                            std::to_string(row_no) + ", column " + std::to_string(reads_col + 1));
    t.total_reads[i] = reads;
    for (std::size_t m = 0; m < cov_cols.size(); ++m)
      t.covariates(i, static_cast<Eigen::Index>(m)) = number(cov_cols[m]);
    for (std::size_t k = 0; k < feature_cols.size(); ++k) {
      const double v = number(feature_cols[k]);
      if (v < 0.0)
        throw ParseError("negative count '" + cells[feature_cols[k]] + "' for feature '" +
                             header[feature_cols[k]] + "'",
                         row_no, feature_cols[k] + 1);
      t.counts(i, static_cast<Eigen::Index>(k)) = v;
    }
  }
  t.validate();
  return t;
}

std::string serialize_table(const FeatureTable& table, TableFormat format, const TableSchema& schema) {
  const char sep = format == TableFormat::csv ? ',' : '\t';
  auto cell = [format](const std::string& s) { return format == TableFormat::csv ? quote_csv(s) : s; };
  std::string out = "sample_id";
  auto add = [&](const std::string& s) {
    out.push_back(sep);
    out += s;
  };
  add(cell(schema.group_column));
  add(cell(schema.reads_column));
  for (const auto& name : table.covariate_names) add(cell(name));
  for (const auto& id : table.feature_ids) add(cell(id));
  out.push_back('\n');
  for (std::size_t i = 0; i < table.n_samples(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out += cell(table.sample_ids[i]);
    add(std::to_string(table.group[i]));
    add(format_double(table.total_reads[r]));
    for (Eigen::Index m = 0; m < table.covariates.cols(); ++m) add(format_double(table.covariates(r, m)));
    for (Eigen::Index k = 0; k < table.counts.cols(); ++k) add(format_double(table.counts(r, k)));
    out.push_back('\n');
  }
  return out;
}

void write_table(const std::filesystem::path& path, const FeatureTable& table, TableFormat format,
                 const TableSchema& schema) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  TableSchema s = schema;
  s.covariate_columns = table.covariate_names;
  out << serialize_table(table, format, s);
}

Eigen::MatrixXd derive_presence(const Eigen::MatrixXd& counts) {
  return (counts.array() > 0.0).cast<double>().matrix();
}

FilterResult filter_features(const Eigen::MatrixXd& presence, const std::vector<std::string>& feature_ids,
                             int min_present) {
  if (min_present < 1) throw std::invalid_argument("min_present must be >= 1");
  if (static_cast<std::size_t>(presence.cols()) != feature_ids.size())
    throw std::invalid_argument("feature id count does not match presence columns");
  FilterResult out;
  for (Eigen::Index k = 0; k < presence.cols(); ++k) {
    if (presence.col(k).sum() >= min_present) {
      out.kept_columns.push_back(static_cast<std::size_t>(k));
      out.kept_ids.push_back(feature_ids[static_cast<std::size_t>(k)]);
    }
  }
  if (out.kept_columns.empty())
    throw ValidationError("no feature is present in at least " + std::to_string(min_present) +
                          " samples; review the filtering threshold");
  out.presence.resize(presence.rows(), static_cast<Eigen::Index>(out.kept_columns.size()));
  for (std::size_t k = 0; k < out.kept_columns.size(); ++k)
    out.presence.col(static_cast<Eigen::Index>(k)) = presence.col(static_cast<Eigen::Index>(out.kept_columns[k]));
  return out;
}

Eigen::MatrixXd AnalysisInput::design_matrix() const {
  const auto n = static_cast<Eigen::Index>(n_samples());
  const auto m = static_cast<Eigen::Index>(n_covariates());
  Eigen::MatrixXd x(n, 3 + m);
  x.col(0).setOnes();
  for (Eigen::Index i = 0; i < n; ++i) x(i, 1) = group[static_cast<std::size_t>(i)];
  x.col(2) = log_reads_centered;
  if (m > 0) x.rightCols(m) = covariates_std;
  return x;
}

AnalysisInput build_design(const FeatureTable& table, int min_present) {
  table.validate();
  if (table.n_samples() < 2) throw ValidationError("at least two samples are required");
  AnalysisInput in;
  auto filtered = filter_features(derive_presence(table.counts), table.feature_ids, min_present);
  in.presence = std::move(filtered.presence);
  in.feature_ids = std::move(filtered.kept_ids);
  in.group = table.group;

  const Eigen::VectorXd log_reads = table.total_reads.array().log10();
  in.log_reads_centered = log_reads.array() - log_reads.mean();

  in.covariate_names = table.covariate_names;
  in.covariates_std.resize(table.covariates.rows(), table.covariates.cols());
  const double n = static_cast<double>(table.n_samples());
  for (Eigen::Index m = 0; m < table.covariates.cols(); ++m) {
    const Eigen::VectorXd col = table.covariates.col(m);
    const double mean = col.mean();
    const double sd = std::sqrt((col.array() - mean).square().sum() / (n - 1.0));
    if (!(sd > 0.0))
      throw ValidationError("covariate '" + table.covariate_names[static_cast<std::size_t>(m)] +
                            "' is constant");
    const bool binary = is_binary_column(col);
    in.covariate_is_binary.push_back(binary);
    in.covariates_std.col(m) = binary ? col : Eigen::VectorXd((col.array() - mean) / sd);
  }

  const Eigen::VectorXd row_totals = table.counts.rowwise().sum();
  in.rel_abundance.resize(table.counts.rows(), static_cast<Eigen::Index>(filtered.kept_columns.size()));
  for (std::size_t k = 0; k < filtered.kept_columns.size(); ++k) {
    const auto src = static_cast<Eigen::Index>(filtered.kept_columns[k]);
    for (Eigen::Index i = 0; i < table.counts.rows(); ++i)
      in.rel_abundance(i, static_cast<Eigen::Index>(k)) =
          row_totals[i] > 0.0 ? table.counts(i, src) / row_totals[i] : 0.0;
  }
  return in;
}

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  if (static_cast<Eigen::Index>(j.size()) != rows) throw SchemaError("matrix row count mismatch");
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != cols) throw SchemaError("matrix column count mismatch");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

}  // namespace

std::string analysis_input_to_json(const AnalysisInput& input) {
  nlohmann::json j;
  j["schema"] = "dipper.analysis_input.v1";
  j["feature_ids"] = input.feature_ids;
  j["group"] = input.group;
  j["log_reads_centered"] = std::vector<double>(input.log_reads_centered.data(),
                                                input.log_reads_centered.data() + input.log_reads_centered.size());
  j["covariate_names"] = input.covariate_names;
  j["covariate_is_binary"] = input.covariate_is_binary;
  j["covariates_std"] = matrix_to_json(input.covariates_std);
  j["presence"] = matrix_to_json(input.presence);
  j["rel_abundance"] = matrix_to_json(input.rel_abundance);
  return j.dump(1);
}

AnalysisInput analysis_input_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("invalid analysis input JSON: ") + e.what());
  }
  if (j.value("schema", "") != "dipper.analysis_input.v1")
    throw SchemaError("unsupported analysis input schema");
  AnalysisInput in;
  in.feature_ids = j.at("feature_ids").get<std::vector<std::string>>();
  in.group = j.at("group").get<std::vector<int>>();
  auto reads = j.at("log_reads_centered").get<std::vector<double>>();
  in.log_reads_centered = Eigen::Map<Eigen::VectorXd>(reads.data(), static_cast<Eigen::Index>(reads.size()));
  in.covariate_names = j.at("covariate_names").get<std::vector<std::string>>();
  in.covariate_is_binary = j.at("covariate_is_binary").get<std::vector<bool>>();
  const auto n = static_cast<Eigen::Index>(in.group.size());
  const auto k = static_cast<Eigen::Index>(in.feature_ids.size());
  in.covariates_std = matrix_from_json(j.at("covariates_std"), n, static_cast<Eigen::Index>(in.covariate_names.size()));
  in.presence = matrix_from_json(j.at("presence"), n, k);
  in.rel_abundance = matrix_from_json(j.at("rel_abundance"), n, k);
  return in;
}

std::vector<NullSplitSpec> make_null_splits(const FeatureTable& table, int n_splits, std::uint64_t seed,
                                            const std::string& source_id) {
  const int n = static_cast<int>(table.n_samples());
  if (n < kMinNullSamples)
    throw ValidationError("null splits need at least " + std::to_string(kMinNullSamples) +
                          " samples in the source group, found " + std::to_string(n));
  if (n_splits < 1) throw std::invalid_argument("n_splits must be positive");
  std::vector<NullSplitSpec> splits;
  splits.reserve(static_cast<std::size_t>(n_splits));
  for (int s = 0; s < n_splits; ++s) {
    auto rng = make_engine(seed, {0x6e756c6cULL, static_cast<std::uint64_t>(s)});
    NullSplitSpec spec;
    spec.source_id = source_id;
    spec.seed = seed;
    spec.index = s;
    spec.balanced = std::bernoulli_distribution(0.5)(rng);
    if (spec.balanced) {
      spec.n_case = (n + 1) / 2;
    } else {
      spec.n_case = std::uniform_int_distribution<int>(kMinNullGroupSize, n - kMinNullGroupSize)(rng);
    }
    spec.n_control = n - spec.n_case;
    std::vector<std::size_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    spec.assignment.assign(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < spec.n_case; ++i) spec.assignment[order[static_cast<std::size_t>(i)]] = 1;
    splits.push_back(std::move(spec));
  }
  return splits;
}

FeatureTable apply_null_split(const FeatureTable& table, const NullSplitSpec& split) {
  if (split.assignment.size() != table.n_samples())
    throw std::invalid_argument("split assignment does not match the table");
  FeatureTable out = table;
  out.group = split.assignment;
  return out;
}

}  // namespace dipper
