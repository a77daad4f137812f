#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace nrn {

/// Dense row-major matrix; rows are samples.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  std::vector<double> column(std::size_t c) const {
    std::vector<double> out(rows);
    for (std::size_t r = 0; r < rows; ++r) out[r] = (*this)(r, c);
    return out;
  }

  Matrix select_rows(std::span<const std::size_t> idx) const {
    Matrix out(idx.size(), cols);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      auto src = row(idx[i]);
      std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

enum class CompareOp { Less, LessEqual, Greater, GreaterEqual };

inline std::string_view to_string(CompareOp op) {
  switch (op) {
    case CompareOp::Less: return "<";
    case CompareOp::LessEqual: return "<=";
    case CompareOp::Greater: return ">";
    case CompareOp::GreaterEqual: return ">=";
  }
  return "?";
}

inline CompareOp parse_compare_op(std::string_view s) {
  if (s == "<") return CompareOp::Less;
  if (s == "<=") return CompareOp::LessEqual;
  if (s == ">") return CompareOp::Greater;
  if (s == ">=") return CompareOp::GreaterEqual;
  throw std::invalid_argument("unknown comparison operator '" + std::string(s) + "'");
}

/// Logical complement: NOT (f < a) is f >= a, and so on.
inline CompareOp negate(CompareOp op) {
  switch (op) {
    case CompareOp::Less: return CompareOp::GreaterEqual;
    case CompareOp::LessEqual: return CompareOp::Greater;
    case CompareOp::Greater: return CompareOp::LessEqual;
    case CompareOp::GreaterEqual: return CompareOp::Less;
  }
  return op;
}

inline bool is_upper_bound(CompareOp op) { return op == CompareOp::Less || op == CompareOp::LessEqual; }
inline bool is_strict(CompareOp op) { return op == CompareOp::Less || op == CompareOp::Greater; }

/// Shortest decimal text that parses back to the same double.
inline std::string format_exact(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_exact(std::string_view s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::invalid_argument("not a number: '" + std::string(s) + "'");
  return v;
}

inline std::string format_sig(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

/// A comparison of one raw feature against a threshold in raw units.
struct ThresholdCondition {
  std::size_t feature_index = 0;
  std::string feature;
  CompareOp op = CompareOp::LessEqual;
  double threshold = 0.0;

  bool holds(double value) const {
    switch (op) {
      case CompareOp::Less: return value < threshold;
      case CompareOp::LessEqual: return value <= threshold;
      case CompareOp::Greater: return value > threshold;
      case CompareOp::GreaterEqual: return value >= threshold;
    }
    return false;
  }
  bool holds_for(std::span<const double> raw_row) const { return holds(raw_row[feature_index]); }

  ThresholdCondition negated() const {
    ThresholdCondition c = *this;
    c.op = negate(op);
    return c;
  }

  std::string to_string() const {
    return feature + " " + std::string(nrn::to_string(op)) + " " + format_sig(threshold, 6);
  }

  friend bool operator==(const ThresholdCondition&, const ThresholdCondition&) = default;
};

/// (v - min) / (max - min); a constant column maps to 0.5.
struct MinMaxScaler {
  double min = 0.0;
  double max = 1.0;

  static MinMaxScaler fit(std::span<const double> col) {
    if (col.empty()) return {};
    MinMaxScaler s{col[0], col[0]};
    for (double v : col) {
      if (!std::isfinite(v)) throw std::invalid_argument("non-finite value in column");
      s.min = std::min(s.min, v);
      s.max = std::max(s.max, v);
    }
    return s;
  }
  bool constant() const { return !(max > min); }
  double forward(double v) const { return constant() ? 0.5 : (v - min) / (max - min); }
  double inverse(double u) const { return constant() ? min : min + u * (max - min); }

  friend bool operator==(const MinMaxScaler&, const MinMaxScaler&) = default;
};

/// Linear-interpolation percentile (numpy's default), q in [0, 1].
inline double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile of empty set");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("percentile rank must lie in [0,1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

}  // namespace nrn
