#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "pmd/model.hpp"

namespace pmd {

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

/// Splits a comma-separated row into doubles. Returns false on any non-numeric field.
inline bool parse_row(std::string_view line, std::vector<double>& out) {
  out.clear();
  while (true) {
    const auto comma = line.find(',');
    const std::string_view field = trim(line.substr(0, comma));
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) return false;
    out.push_back(v);
    if (comma == std::string_view::npos) return true;
    line.remove_prefix(comma + 1);
  }
}

}  // namespace detail

/// Numeric CSV, one datum per row. A first line that does not parse as numbers
/// is taken as a header. With `has_labels` the last column is the label.
inline Dataset parse_dataset(std::istream& is, bool has_labels, const std::string& source = "<stream>") {
  std::vector<double> values;
  std::vector<double> row;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    if (!detail::parse_row(line, row)) {
      if (lineno == 1) continue;
      throw Error(ErrorKind::Parse, source + ":" + std::to_string(lineno) + ": non-numeric field in '" + line + "'");
    }
    for (double v : row)
      if (!std::isfinite(v))
        throw Error(ErrorKind::InvalidData, source + ":" + std::to_string(lineno) + ": NaN or Inf value");
    if (rows == 0) cols = row.size();
    if (row.size() != cols)
      throw Error(ErrorKind::InvalidData, source + ":" + std::to_string(lineno) + ": expected " + std::to_string(cols) +
                                              " columns, found " + std::to_string(row.size()));
    values.insert(values.end(), row.begin(), row.end());
    ++rows;
  }
  if (rows == 0) throw Error(ErrorKind::InvalidParameter, source + ": dataset is empty");
  Dataset data;
  data.has_labels = has_labels;
  data.points = Eigen::Map<const Matrix>(values.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  validate_dataset(data);
  return data;
}

inline Dataset load_dataset(const std::string& path, bool has_labels = false) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::Io, "cannot open dataset " + path);
  return parse_dataset(is, has_labels, path);
}

inline void write_dataset_csv(std::ostream& os, const Dataset& data) {
  os.precision(17);
  const auto d = static_cast<Eigen::Index>(data.feature_dim());
  for (Eigen::Index j = 0; j < d; ++j) os << (j ? "," : "") << 'x' << (j + 1);
  if (data.has_labels) os << ",y";
  os << '\n';
  for (Eigen::Index n = 0; n < data.points.rows(); ++n) {
    for (Eigen::Index j = 0; j < data.points.cols(); ++j) os << (j ? "," : "") << data.points(n, j);
    os << '\n';
  }
}

}  // namespace pmd
