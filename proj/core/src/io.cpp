#include "gpbag/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>

namespace gpbag {

namespace {

std::vector<std::string> split_line(const std::string& line, char delimiter) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t end = line.find(delimiter, start);
    cells.push_back(line.substr(start, end == std::string::npos ? std::string::npos : end - start));
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return cells;
}

std::string trimmed(const std::string& s) {
  const auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

bool parse_cell(const std::string& raw, double& out) {
  const std::string cell = trimmed(raw);
  if (cell.empty()) return false;
  const char* first = cell.data();
  const char* last = first + cell.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) return false;
  return std::isfinite(out);
}

}  // namespace

LoadResult load_delimited(const std::filesystem::path& path, const LoadSpec& spec) {
  const bool has_target = !spec.target.empty();
  std::ifstream in(path);
  if (!in) throw InputError("load: cannot open " + path.string());

  std::string header_line;
  if (!std::getline(in, header_line)) throw ParseError("load: " + path.string() + " is empty");
  // Strip a UTF-8 byte-order mark and a trailing carriage return.
  if (header_line.rfind("\xEF\xBB\xBF", 0) == 0) header_line.erase(0, 3);
  if (!header_line.empty() && header_line.back() == '\r') header_line.pop_back();

  std::vector<std::string> header;
  for (const auto& cell : split_line(header_line, spec.delimiter)) header.push_back(trimmed(cell));
  if (header.empty() || (header.size() == 1 && header[0].empty()))
    throw ParseError("load: " + path.string() + " has no header columns");

  const auto column_of = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw InputError("load: column '" + name + "' not found in " + path.string());
    return static_cast<std::size_t>(it - header.begin());
  };

  const std::size_t target_col = has_target ? column_of(spec.target) : header.size();
  std::vector<std::size_t> feature_cols;
  LoadResult result;
  if (spec.features.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c == target_col) continue;
      feature_cols.push_back(c);
      result.feature_names.push_back(header[c]);
    }
  } else {
    for (const auto& name : spec.features) {
      const std::size_t c = column_of(name);
      if (c == target_col)
        throw InputError("load: feature '" + name + "' is also the target column");
      feature_cols.push_back(c);
      result.feature_names.push_back(name);
    }
  }
  if (feature_cols.empty()) throw InputError("load: no feature columns left after selection");

  std::vector<double> x_values;
  std::vector<double> y_values;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trimmed(line).empty()) continue;
    const auto cells = split_line(line, spec.delimiter);
    if (cells.size() != header.size()) {
      ++result.dropped_rows;
      continue;
    }
    double y = 0.0;
    std::vector<double> row(feature_cols.size());
    bool ok = !has_target || parse_cell(cells[target_col], y);
    for (std::size_t j = 0; ok && j < feature_cols.size(); ++j)
      ok = parse_cell(cells[feature_cols[j]], row[j]);
    if (!ok) {
      ++result.dropped_rows;
      continue;
    }
    x_values.insert(x_values.end(), row.begin(), row.end());
    y_values.push_back(y);
  }

  if (y_values.empty())
    throw InputError("load: " + path.string() + " has no usable data rows (" +
                     std::to_string(result.dropped_rows) + " dropped)");

  const auto rows = static_cast<Eigen::Index>(y_values.size());
  const auto cols = static_cast<Eigen::Index>(feature_cols.size());
  Dataset raw;
  raw.X = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      x_values.data(), rows, cols);
  raw.y = Eigen::Map<const Eigen::VectorXd>(y_values.data(), rows);

  result.data = spec.standardize ? standardized(raw) : std::move(raw);
  return result;
}

void save_delimited(const std::filesystem::path& path, const Dataset& data,
                    const std::vector<std::string>& feature_names,
                    const std::string& target_name, char delimiter) {
  if (static_cast<Eigen::Index>(feature_names.size()) != data.dim())
    throw InputError("save: feature name count does not match the data");
  if (target_name.empty()) throw InputError("save: target column name is required");
  std::ofstream out(path);
  if (!out) throw InputError("save: cannot open " + path.string() + " for writing");

  out.precision(17);
  for (const auto& name : feature_names) out << name << delimiter;
  out << target_name << "\n";
  for (Eigen::Index r = 0; r < data.size(); ++r) {
    for (Eigen::Index c = 0; c < data.dim(); ++c) out << data.X(r, c) << delimiter;
    out << data.y(r) << "\n";
  }
  if (!out) throw InputError("save: write failed for " + path.string());
}

}  // namespace gpbag
