#include "hetscan/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

namespace hetscan {

namespace {

// Spread below this, relative to magnitude, is roundoff in a constant column.
constexpr double kConstantTol = 1e-12;

}  // namespace

std::string to_string(Family family) {
  return family == Family::Gaussian ? "gaussian" : "bernoulli";
}

Family parse_family(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "gaussian") return Family::Gaussian;
  if (lower == "bernoulli") return Family::Bernoulli;
  throw DataError("unknown family '" + std::string(name) + "' (expected gaussian or bernoulli)");
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
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
      cells.emplace_back(trim(cell));
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  cells.emplace_back(trim(cell));
  return cells;
}

bool parse_double(std::string_view text, double& out) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return false;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size() && std::isfinite(out);
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

std::string format_number(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw DataError("cannot format number");
  return std::string(buf, ptr);
}

int LevelEncoding::code_of(std::string_view label) const {
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) return static_cast<int>(i) + 1;
  return 0;
}

LevelEncoding encode_groups(std::span<const std::string> raw_labels) {
  if (raw_labels.empty()) throw DataError("cannot encode an empty grouping column");
  LevelEncoding enc;
  std::unordered_map<std::string, int> seen;
  enc.codes.reserve(raw_labels.size());
  for (const auto& label : raw_labels) {
    auto [it, inserted] = seen.try_emplace(label, static_cast<int>(enc.labels.size()) + 1);
    if (inserted) enc.labels.push_back(label);
    enc.codes.push_back(it->second);
  }
  if (enc.n_levels() < 2)
    throw DataError("grouping has a single level '" + enc.labels.front() + "'");
  return enc;
}

LevelEncoding encode_groups(std::span<const double> raw_labels) {
  std::vector<std::string> text;
  text.reserve(raw_labels.size());
  for (double v : raw_labels) text.push_back(format_number(v));
  return encode_groups(text);
}

void Dataset::validate() const {
  const int n = n_obs();
  if (n < 1) throw DataError("dataset has no observations");
  if (n_predictors() < 1) throw DataError("dataset has no numerical predictors");
  if (x.rows() != n) throw DataError("predictor matrix row count does not match response length");
  if (static_cast<int>(predictor_names.size()) != n_predictors())
    throw DataError("predictor name count does not match predictor columns");
  if (grouping_names.size() != groups.size() || level_labels.size() != groups.size())
    throw DataError("grouping names/labels do not match grouping columns");
  if (!x.allFinite() || !y.allFinite()) throw DataError("dataset contains non-finite values");
  for (int k = 0; k < n_groupings(); ++k) {
    const auto& col = groups[k];
    const int levels = n_levels(k);
    if (static_cast<int>(col.size()) != n)
      throw DataError("grouping column '" + grouping_names[k] + "' has wrong length");
    if (levels < 2) throw DataError("grouping column '" + grouping_names[k] + "' has a single level");
    std::vector<bool> used(levels, false);
    for (int c : col) {
      if (c < 1 || c > levels)
        throw DataError("grouping column '" + grouping_names[k] + "' has code out of range");
      used[c - 1] = true;
    }
    if (std::find(used.begin(), used.end(), false) != used.end())
      throw DataError("grouping column '" + grouping_names[k] + "' has unused level codes");
  }
  if (family == Family::Bernoulli) {
    for (int i = 0; i < n; ++i)
      if (y[i] != 0.0 && y[i] != 1.0) throw DataError("Bernoulli response must be 0/1");
  }
}

bool operator==(const Dataset& a, const Dataset& b) {
  return a.family == b.family && a.response_name == b.response_name &&
         a.predictor_names == b.predictor_names && a.grouping_names == b.grouping_names &&
         a.groups == b.groups && a.level_labels == b.level_labels && a.x.rows() == b.x.rows() &&
         a.x.cols() == b.x.cols() && a.x == b.x && a.y.size() == b.y.size() && a.y == b.y;
}

Dataset parse_csv(std::istream& in, const CsvSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("CSV input is empty (header row required)");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const std::vector<std::string> header = split_csv_line(line);

  std::vector<std::vector<std::string>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                      " cells, found " + std::to_string(cells.size()));
    rows.push_back(std::move(cells));
  }
  if (rows.empty()) throw DataError("CSV has no data rows");

  auto column_index = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("column '" + name + "' not found in header");
    return static_cast<int>(it - header.begin());
  };

  const int response_col = column_index(schema.response_name);
  std::vector<int> grouping_cols;
  for (const auto& g : schema.grouping_names) {
    const int c = column_index(g);
    if (c == response_col) throw DataError("column '" + g + "' is both response and grouping");
    if (std::find(grouping_cols.begin(), grouping_cols.end(), c) != grouping_cols.end())
      throw DataError("grouping column '" + g + "' listed twice");
    grouping_cols.push_back(c);
  }

  const auto n = static_cast<int>(rows.size());
  auto cell_at = [&](int row, int col) -> const std::string& { return rows[row][col]; };
  auto missing = [&](int row, int col) {
    return DataError("missing value in column '" + header[col] + "' at data row " + std::to_string(row + 1));
  };

  Dataset data;
  data.family = schema.family;
  data.response_name = schema.response_name;
  data.grouping_names = schema.grouping_names;

  std::vector<int> predictor_cols;
  for (int c = 0; c < static_cast<int>(header.size()); ++c) {
    if (c == response_col) continue;
    if (std::find(grouping_cols.begin(), grouping_cols.end(), c) != grouping_cols.end()) continue;
    double probe;
    if (parse_double(cell_at(0, c), probe)) predictor_cols.push_back(c);
  }
  if (predictor_cols.empty()) throw DataError("no numerical predictor columns found");

  data.x.resize(n, static_cast<Eigen::Index>(predictor_cols.size()));
  for (std::size_t j = 0; j < predictor_cols.size(); ++j) {
    const int c = predictor_cols[j];
    data.predictor_names.push_back(header[c]);
    for (int i = 0; i < n; ++i) {
      const std::string& cell = cell_at(i, c);
      if (trim(cell).empty()) throw missing(i, c);
      double v;
      if (!parse_double(cell, v))
        throw DataError("unparseable numeric cell '" + cell + "' in column '" + header[c] + "' at data row " +
                        std::to_string(i + 1));
      data.x(i, static_cast<Eigen::Index>(j)) = v;
    }
  }

  for (std::size_t k = 0; k < grouping_cols.size(); ++k) {
    const int c = grouping_cols[k];
    std::vector<std::string> raw;
    raw.reserve(n);
    for (int i = 0; i < n; ++i) {
      if (trim(cell_at(i, c)).empty()) throw missing(i, c);
      raw.push_back(cell_at(i, c));
    }
    try {
      LevelEncoding enc = encode_groups(raw);
      data.groups.push_back(std::move(enc.codes));
      data.level_labels.push_back(std::move(enc.labels));
    } catch (const DataError&) {
      throw DataError("grouping column '" + header[c] + "' has a single level");
    }
  }

  data.y.resize(n);
  if (schema.family == Family::Gaussian) {
    for (int i = 0; i < n; ++i) {
      const std::string& cell = cell_at(i, response_col);
      if (trim(cell).empty()) throw missing(i, response_col);
      if (!parse_double(cell, data.y[i]))
        throw DataError("unparseable numeric cell '" + cell + "' in response column '" + schema.response_name +
                        "' at data row " + std::to_string(i + 1));
    }
  } else {
    // Values are compared numerically when every cell parses, textually otherwise.
    bool all_numeric = true;
    std::vector<double> numeric(n);
    for (int i = 0; i < n; ++i) {
      if (trim(cell_at(i, response_col)).empty()) throw missing(i, response_col);
      all_numeric = all_numeric && parse_double(cell_at(i, response_col), numeric[i]);
    }
    std::vector<std::string> keys(n);
    for (int i = 0; i < n; ++i)
      keys[i] = all_numeric ? format_number(numeric[i]) : std::string(trim(cell_at(i, response_col)));
    std::vector<std::string> distinct;
    for (const auto& key : keys)
      if (std::find(distinct.begin(), distinct.end(), key) == distinct.end()) distinct.push_back(key);
    if (distinct.size() != 2)
      throw DataError("Bernoulli response '" + schema.response_name + "' must have exactly 2 distinct values, found " +
                      std::to_string(distinct.size()));
    const bool zero_one = all_numeric && std::set<std::string>(distinct.begin(), distinct.end()) ==
                                             std::set<std::string>{"0", "1"};
    for (int i = 0; i < n; ++i) {
      if (zero_one)
        data.y[i] = numeric[i];
      else
        data.y[i] = keys[i] == distinct[0] ? 0.0 : 1.0;
    }
  }

  data.validate();
  return data;
}

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open data file '" + path.string() + "'");
  return parse_csv(in, schema);
}

void write_csv(const Dataset& data, std::ostream& out) {
  std::vector<std::string> header = data.predictor_names;
  header.insert(header.end(), data.grouping_names.begin(), data.grouping_names.end());
  header.push_back(data.response_name);
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << csv_escape(header[j]);
  out << '\n';
  for (int i = 0; i < data.n_obs(); ++i) {
    for (int d = 0; d < data.n_predictors(); ++d) out << (d ? "," : "") << format_number(data.x(i, d));
    for (int k = 0; k < data.n_groupings(); ++k)
      out << ',' << csv_escape(data.level_labels[k][data.groups[k][i] - 1]);
    out << ',' << format_number(data.y[i]) << '\n';
  }
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  write_csv(data, out);
}

Eigen::MatrixXd StandardizationParams::apply(const Eigen::MatrixXd& x) const {
  return (x.rowwise() - means.transpose()).array().rowwise() / stds.transpose().array();
}

Eigen::MatrixXd StandardizationParams::invert(const Eigen::MatrixXd& z) const {
  return (z.array().rowwise() * stds.transpose().array()).matrix().rowwise() + means.transpose();
}

int EncodedDesign::n_numerical() const {
  return static_cast<int>(std::count(column_kinds.begin(), column_kinds.end(), ColumnKind::Numerical));
}

int EncodedDesign::n_dummy() const {
  return static_cast<int>(std::count(column_kinds.begin(), column_kinds.end(), ColumnKind::Dummy));
}

std::pair<EncodedDesign, StandardizationParams> standardize(const Dataset& data) {
  const int n = data.n_obs();
  const int d = data.n_predictors();
  const int k = data.n_groupings();

  StandardizationParams params;
  params.means = data.x.colwise().mean().transpose();
  params.stds.resize(d);
  for (int j = 0; j < d; ++j) {
    const double ss = n > 1 ? (data.x.col(j).array() - params.means[j]).square().sum() / (n - 1) : 0.0;
    const double sd = std::sqrt(ss);
    if (!(sd > kConstantTol * (1.0 + data.x.col(j).cwiseAbs().maxCoeff())) || !std::isfinite(sd))
      throw DataError("constant column " + data.predictor_names[j]);
    params.stds[j] = sd;
  }

  EncodedDesign design;
  design.z.resize(n, d + k);
  design.z.leftCols(d) = params.apply(data.x);
  for (int g = 0; g < k; ++g)
    for (int i = 0; i < n; ++i) design.z(i, d + g) = data.groups[g][i];
  design.column_kinds.assign(d, ColumnKind::Numerical);
  design.column_kinds.insert(design.column_kinds.end(), k, ColumnKind::Dummy);
  return {std::move(design), std::move(params)};
}

ResponseScaling standardize_response(const Eigen::VectorXd& y) {
  ResponseScaling out;
  const auto n = y.size();
  out.mean = y.mean();
  const double ss = n > 1 ? (y.array() - out.mean).square().sum() / static_cast<double>(n - 1) : 0.0;
  out.sd = std::sqrt(ss);
  if (!(out.sd > kConstantTol * (1.0 + y.cwiseAbs().maxCoeff()))) throw DataError("response is constant");
  out.scaled = (y.array() - out.mean) / out.sd;
  return out;
}

}  // namespace hetscan
