#pragma once

// Numeric CSV with a header row. No missing values, no quoting beyond a
// pair of surrounding double quotes on a field.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nrn/common.hpp"
#include "nrn/preprocess.hpp"

namespace nrn {

struct CsvTable {
  std::vector<std::string> header;
  Matrix values;

  std::optional<std::size_t> column_index(std::string_view name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace detail

inline CsvTable parse_csv(std::istream& in, const std::string& source = "<csv>") {
  CsvTable t;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::vector<double> flat;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_fields(line);
    if (!have_header) {
      for (auto f : fields) {
        if (f.empty()) throw std::runtime_error(source + ": empty column name in header");
        t.header.emplace_back(f);
      }
      auto sorted = t.header;
      std::sort(sorted.begin(), sorted.end());
      if (auto d = std::adjacent_find(sorted.begin(), sorted.end()); d != sorted.end())
        throw std::runtime_error(source + ": duplicate column '" + *d + "'");
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size())
      throw std::runtime_error(source + ":" + std::to_string(line_no) + ": expected " +
                               std::to_string(t.header.size()) + " fields, found " +
                               std::to_string(fields.size()));
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const auto f = fields[c];
      if (f.empty())
        throw std::runtime_error(source + ":" + std::to_string(line_no) + ": missing value in column '" +
                                 t.header[c] + "'");
      double v = 0.0;
      const char* first = f.data();
      if (*first == '+') ++first;
      auto [p, ec] = std::from_chars(first, f.data() + f.size(), v);
      if (ec != std::errc() || p != f.data() + f.size() || !std::isfinite(v))
        throw std::runtime_error(source + ":" + std::to_string(line_no) + ": non-numeric value '" +
                                 std::string(f) + "' in column '" + t.header[c] + "'");
      flat.push_back(v);
    }
    ++rows;
  }
  if (!have_header) throw std::runtime_error(source + ": file is empty (no header row)");
  t.values = Matrix(rows, t.header.size());
  t.values.data = std::move(flat);
  return t;
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return parse_csv(in, path);
}

/// Splits off the label column; every other column becomes a feature in
/// file order. Labels must be 0 or 1.
inline Dataset to_dataset(const CsvTable& t, const std::string& label) {
  const auto li = t.column_index(label);
  if (!li) throw std::runtime_error("label column '" + label + "' not found");
  Dataset d;
  std::vector<std::size_t> cols;
  for (std::size_t c = 0; c < t.header.size(); ++c)
    if (c != *li) {
      cols.push_back(c);
      d.feature_names.push_back(t.header[c]);
    }
  d.features = Matrix(t.values.rows, cols.size());
  d.labels.resize(t.values.rows);
  for (std::size_t r = 0; r < t.values.rows; ++r) {
    for (std::size_t k = 0; k < cols.size(); ++k) d.features(r, k) = t.values(r, cols[k]);
    const double y = t.values(r, *li);
    if (y != 0.0 && y != 1.0)
      throw std::runtime_error("label column '" + label + "' must be binary (0/1); row " +
                               std::to_string(r + 1) + " has " + format_sig(y, 17));
    d.labels[r] = static_cast<int>(y);
  }
  return d;
}

/// Reorders the table's columns to match schema by name. The ignored
/// column (the training label) may be present or absent.
inline Matrix bind_columns(const CsvTable& t, const std::vector<std::string>& schema,
                           const std::string& ignored = {}) {
  std::vector<std::string> missing, extra;
  std::vector<std::size_t> idx;
  for (const auto& name : schema) {
    auto c = t.column_index(name);
    if (!c)
      missing.push_back(name);
    else
      idx.push_back(*c);
  }
  for (const auto& h : t.header)
    if (h != ignored && std::find(schema.begin(), schema.end(), h) == schema.end()) extra.push_back(h);
  if (!missing.empty() || !extra.empty()) {
    auto join = [](const std::vector<std::string>& v) {
      std::string s;
      for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + v[i];
      return s.empty() ? std::string("none") : s;
    };
    throw std::runtime_error("column mismatch with model schema; missing: " + join(missing) +
                             "; extra: " + join(extra));
  }
  Matrix m(t.values.rows, schema.size());
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t k = 0; k < idx.size(); ++k) m(r, k) = t.values(r, idx[k]);
  return m;
}

}  // namespace nrn
