#include "dipper/report.hpp"

#include <fstream>
#include <sstream>

#include "dipper/data.hpp"
#include "dipper/text.hpp"

namespace dipper {

namespace {

const std::vector<std::string> kResultColumns = {"feature_id", "method", "estimate", "se",          "ci_low",
                                                 "ci_high",    "p",      "q",        "significant"};

std::optional<double> parse_optional_cell(std::string_view cell, std::size_t row, std::size_t col) {
  const auto t = trim(cell);
  if (t.empty()) return std::nullopt;
  auto v = parse_double(t);
  if (!v) throw ParseError("malformed number '" + std::string(t) + "'", row, col);
  return v;
}

std::string header_line(const char* schema) { return std::string("#schema=") + schema; }

}  // namespace

bool is_bayesian_method(const std::string& method) { return method == "dipper" || method == "dipper_gaussian"; }

std::vector<ResultRow> rows_from_tests(const std::vector<TestResult>& results) {
  std::vector<ResultRow> rows;
  for (const auto& r : results)
    rows.push_back({r.feature_id, to_string(r.method), r.estimate, r.se, r.ci_low, r.ci_high, r.p, r.q,
                    r.significant});
  return rows;
}

std::vector<ResultRow> rows_from_summaries(const std::vector<FeatureSummary>& summaries, const std::string& method) {
  std::vector<ResultRow> rows;
  for (const auto& s : summaries)
    rows.push_back({s.feature_id, method, s.median, std::nullopt, s.ci_low, s.ci_high, std::nullopt, std::nullopt,
                    s.significant});
  return rows;
}

std::string serialize_results(const std::vector<ResultRow>& rows) {
  std::ostringstream out;
  out << header_line(kResultsSchema) << '\n';
  for (std::size_t c = 0; c < kResultColumns.size(); ++c) out << (c ? "\t" : "") << kResultColumns[c];
  out << '\n';
  for (const auto& r : rows) {
    out << r.feature_id << '\t' << r.method << '\t' << format_optional(r.estimate) << '\t' << format_optional(r.se)
        << '\t' << format_optional(r.ci_low) << '\t' << format_optional(r.ci_high) << '\t' << format_optional(r.p)
        << '\t' << format_optional(r.q) << '\t' << (r.significant ? "true" : "false") << '\n';
  }
  return out.str();
}

std::vector<ResultRow> parse_results(std::string_view text) {
  std::vector<std::string_view> lines;
  for (std::size_t pos = 0; pos < text.size();) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = end + 1;
  }
  if (lines.empty() || trim(lines[0]) != header_line(kResultsSchema))
    throw SchemaError(std::string("results file does not declare schema ") + kResultsSchema);
  if (lines.size() < 2) throw SchemaError("results file has no column header");
  const auto header = split_line(lines[1], '\t');
  if (header.size() != kResultColumns.size())
    throw SchemaError("results file has " + std::to_string(header.size()) + " columns, expected " +
                      std::to_string(kResultColumns.size()));
  for (std::size_t c = 0; c < header.size(); ++c)
    if (trim(header[c]) != kResultColumns[c])
      throw SchemaError("results column " + std::to_string(c + 1) + " is '" + std::string(header[c]) + "', expected '" +
                        kResultColumns[c] + "'");
  std::vector<ResultRow> rows;
  for (std::size_t i = 2; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto cells = split_line(lines[i], '\t');
    const std::size_t row = i + 1;
    if (cells.size() != kResultColumns.size())
      throw ParseError("expected " + std::to_string(kResultColumns.size()) + " cells", row, cells.size());
    ResultRow r;
    r.feature_id = std::string(trim(cells[0]));
    r.method = std::string(trim(cells[1]));
    r.estimate = parse_optional_cell(cells[2], row, 3);
    r.se = parse_optional_cell(cells[3], row, 4);
    r.ci_low = parse_optional_cell(cells[4], row, 5);
    r.ci_high = parse_optional_cell(cells[5], row, 6);
    r.p = parse_optional_cell(cells[6], row, 7);
    r.q = parse_optional_cell(cells[7], row, 8);
    const auto sig = trim(cells[8]);
    if (sig != "true" && sig != "false") throw ParseError("significant must be true or false", row, 9);
    r.significant = sig == "true";
    if (r.p && !(*r.p >= 0.0 && *r.p <= 1.0)) throw ParseError("p outside [0, 1]", row, 7);
    if (r.q && !(*r.q >= 0.0 && *r.q <= 1.0)) throw ParseError("q outside [0, 1]", row, 8);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_results(const std::filesystem::path& path, const std::vector<ResultRow>& rows) {
  write_text_file(path, serialize_results(rows));
}

std::vector<ResultRow> read_results(const std::filesystem::path& path) { return parse_results(read_text_file(path)); }

void write_beta_draws(const std::filesystem::path& path, const DipperFit& fit) {
  std::ostringstream out;
  out << header_line(kDrawsSchema) << '\n' << "chain\titeration\tparameter\tvalue\n";
  const auto& d = fit.draws;
  for (int c = 0; c < d.chains(); ++c)
    for (int i = 0; i < d.draws(); ++i)
      for (int j = 0; j < fit.layout.n_features; ++j)
        out << c << '\t' << i << '\t' << fit.feature_ids[static_cast<std::size_t>(j)] << '\t'
            << format_double(d(c, i, fit.layout.beta_index(j))) << '\n';
  write_text_file(path, out.str());
}

std::map<std::string, std::vector<double>> read_beta_draws(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || trim(line) != header_line(kDrawsSchema))
    throw SchemaError(std::string("draws file does not declare schema ") + kDrawsSchema);
  if (!std::getline(in, line) || trim(line) != "chain\titeration\tparameter\tvalue")
    throw SchemaError("draws file has an unexpected column header");
  std::map<std::string, std::vector<double>> out;
  std::size_t row = 2;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split_line(line, '\t');
    if (cells.size() != 4) throw ParseError("expected 4 cells", row, cells.size());
    const auto v = parse_double(cells[3]);
    if (!v) throw ParseError("malformed draw value", row, 4);
    out[std::string(trim(cells[2]))].push_back(*v);
  }
  return out;
}

void write_plot_tsv(const std::filesystem::path& path, const std::vector<PlotRecord>& records) {
  std::ostringstream out;
  out << header_line(kPlotSchema) << '\n' << "method\tmetric\tvalue\tdataset\n";
  for (const auto& r : records)
    out << r.method << '\t' << r.metric << '\t' << format_double(r.value) << '\t' << r.dataset << '\n';
  write_text_file(path, out.str());
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace dipper
