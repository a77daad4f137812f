#pragma once

// Weighted Lukasiewicz conjunction/disjunction with sign-masked inputs.
//
// A node with weights w and bias beta evaluates
//   And: clamp(beta - sum_j |w_j| (1 - i_j))
//   Or : clamp(1 - beta + sum_j |w_j| i_j)
// where i_j = x_j when w_j > 0 and 1 - x_j otherwise. Negative weights are
// negated literals; there is no separate negation parameter.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace nrn {

/// Confidence in [0,1] that a statement holds.
using TruthValue = double;

enum class LogicKind { Conjunction, Disjunction };

inline std::string_view to_string(LogicKind kind) {
  return kind == LogicKind::Conjunction ? "And" : "Or";
}

inline LogicKind parse_logic_kind(std::string_view s) {
  if (s == "And") return LogicKind::Conjunction;
  if (s == "Or") return LogicKind::Disjunction;
  throw std::invalid_argument("unknown logic kind '" + std::string(s) + "'");
}

inline LogicKind dual(LogicKind kind) {
  return kind == LogicKind::Conjunction ? LogicKind::Disjunction : LogicKind::Conjunction;
}

struct NodeParams {
  std::vector<double> weights;
  double beta = 1.0;

  void validate() const {
    if (weights.empty()) throw std::invalid_argument("node has no weights");
    if (!(beta >= 0.0)) throw std::invalid_argument("node bias must be >= 0");
  }
};

struct BlockShape {
  std::size_t channels = 1;
  std::size_t out_size = 1;
  std::size_t in_size = 1;

  void validate() const {
    if (channels == 0 || out_size == 0 || in_size == 0)
      throw std::invalid_argument("block dimensions must all be >= 1");
  }
  std::size_t weight_count() const { return channels * out_size * in_size; }
  friend bool operator==(const BlockShape&, const BlockShape&) = default;
};

inline double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

/// 1 where the clamp is linear; boundary points take the interior slope.
inline double clamp_slope(double pre) { return (pre < 0.0 || pre > 1.0) ? 0.0 : 1.0; }

inline bool weight_mask(double w) { return w > 0.0; }

inline double masked_input(TruthValue x, double w) { return weight_mask(w) ? x : 1.0 - x; }

inline double weight_sign(double w) { return w > 0.0 ? 1.0 : (w < 0.0 ? -1.0 : 0.0); }

/// Pre-clamp activation. Summation runs in index order so that batched and
/// scalar evaluation agree bit for bit.
inline double preactivation(LogicKind kind, std::span<const double> weights, double beta,
                            std::span<const double> x) {
  double acc = 0.0;
  if (kind == LogicKind::Conjunction) {
    for (std::size_t j = 0; j < weights.size(); ++j)
      acc += std::abs(weights[j]) * (1.0 - masked_input(x[j], weights[j]));
    return beta - acc;
  }
  for (std::size_t j = 0; j < weights.size(); ++j)
    acc += std::abs(weights[j]) * masked_input(x[j], weights[j]);
  return 1.0 - beta + acc;
}

namespace detail {
inline void check_arity(const NodeParams& params, std::span<const double> x) {
  params.validate();
  if (x.size() != params.weights.size())
    throw std::invalid_argument("input arity " + std::to_string(x.size()) +
                                " does not match weight count " +
                                std::to_string(params.weights.size()));
}
}  // namespace detail

inline TruthValue eval_node(LogicKind kind, const NodeParams& params, std::span<const double> x) {
  detail::check_arity(params, x);
  return clamp01(preactivation(kind, params.weights, params.beta, x));
}

inline TruthValue eval_conjunction(const NodeParams& params, std::span<const double> x) {
  return eval_node(LogicKind::Conjunction, params, x);
}

inline TruthValue eval_disjunction(const NodeParams& params, std::span<const double> x) {
  return eval_node(LogicKind::Disjunction, params, x);
}

struct NodeGradients {
  std::vector<double> d_input;
  std::vector<double> d_weight;
};

/// Partial derivatives of the pre-clamp term, times the clamp slope.
/// d/dx_j = |w_j| * (m_j ? 1 : -1), which equals w_j; the mask is treated as
/// constant and d|w|/dw is taken as 0 at w = 0.
inline void accumulate_node_gradients(LogicKind kind, std::span<const double> weights, double beta,
                                      std::span<const double> x, double upstream,
                                      std::span<double> d_input, std::span<double> d_weight) {
  const double g = upstream * clamp_slope(preactivation(kind, weights, beta, x));
  if (g == 0.0) return;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    const double w = weights[j];
    const double i = masked_input(x[j], w);
    d_input[j] += g * (weight_mask(w) ? std::abs(w) : -std::abs(w));
    const double d_abs = kind == LogicKind::Conjunction ? -(1.0 - i) : i;
    d_weight[j] += g * weight_sign(w) * d_abs;
  }
}

inline NodeGradients node_gradients(LogicKind kind, const NodeParams& params,
                                    std::span<const double> x) {
  detail::check_arity(params, x);
  NodeGradients out{std::vector<double>(x.size(), 0.0), std::vector<double>(x.size(), 0.0)};
  accumulate_node_gradients(kind, params.weights, params.beta, x, 1.0, out.d_input, out.d_weight);
  return out;
}

/// Row-major rank-3 tensor of doubles.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(std::size_t d0, std::size_t d1, std::size_t d2, double fill = 0.0)
      : d0_(d0), d1_(d1), d2_(d2), data_(d0 * d1 * d2, fill) {}

  double& operator()(std::size_t a, std::size_t b, std::size_t c) {
    return data_[(a * d1_ + b) * d2_ + c];
  }
  double operator()(std::size_t a, std::size_t b, std::size_t c) const {
    return data_[(a * d1_ + b) * d2_ + c];
  }
  std::span<double> row(std::size_t a, std::size_t b) { return {&data_[(a * d1_ + b) * d2_], d2_}; }
  std::span<const double> row(std::size_t a, std::size_t b) const {
    return {data_.data() + (a * d1_ + b) * d2_, d2_};
  }

  std::size_t dim0() const { return d0_; }
  std::size_t dim1() const { return d1_; }
  std::size_t dim2() const { return d2_; }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  friend bool operator==(const Tensor3&, const Tensor3&) = default;

 private:
  std::size_t d0_ = 0, d1_ = 0, d2_ = 0;
  std::vector<double> data_;
};

/// Evaluates every node of a block for every batch row.
///
/// weights and connectivity are (C, O, I); betas is (C, O) flattened;
/// inputs is (batch, C, W) where W is the previous layer width. Node (c, o)
/// reads inputs[b, c, connectivity(c, o, i)] for i in [0, I).
inline Tensor3 block_forward(const BlockShape& shape, LogicKind kind, const Tensor3& weights,
                             std::span<const double> betas,
                             std::span<const std::size_t> connectivity, const Tensor3& inputs) {
  shape.validate();
  if (weights.dim0() != shape.channels || weights.dim1() != shape.out_size ||
      weights.dim2() != shape.in_size)
    throw std::invalid_argument("block weight tensor does not match block shape");
  if (betas.size() != shape.channels * shape.out_size)
    throw std::invalid_argument("block bias tensor does not match block shape");
  if (connectivity.size() != shape.weight_count())
    throw std::invalid_argument("block connectivity does not match block shape");
  if (inputs.dim1() != shape.channels)
    throw std::invalid_argument("input channel count does not match block shape");
  const std::size_t width = inputs.dim2();
  for (std::size_t idx : connectivity)
    if (idx >= width) throw std::invalid_argument("connectivity index out of range");

  Tensor3 out(inputs.dim0(), shape.channels, shape.out_size);
  std::vector<double> gathered(shape.in_size);
  for (std::size_t b = 0; b < inputs.dim0(); ++b) {
    for (std::size_t c = 0; c < shape.channels; ++c) {
      const auto in_row = inputs.row(b, c);
      for (std::size_t o = 0; o < shape.out_size; ++o) {
        const std::size_t base = (c * shape.out_size + o) * shape.in_size;
        for (std::size_t i = 0; i < shape.in_size; ++i) gathered[i] = in_row[connectivity[base + i]];
        out(b, c, o) = clamp01(preactivation(kind, weights.row(c, o), betas[c * shape.out_size + o],
                                             gathered));
      }
    }
  }
  return out;
}

/// Smallest masked value child j must supply for the node to reach t, with
/// every other child held at its current value. The result is on the masked
/// scale: for a negative weight it bounds 1 - x_j, not x_j.
inline TruthValue required_child_value(LogicKind kind, const NodeParams& params,
                                       std::span<const double> child_values, TruthValue t,
                                       std::size_t j) {
  detail::check_arity(params, child_values);
  if (j >= params.weights.size()) throw std::out_of_range("child index out of range");
  const double wj = std::abs(params.weights[j]);
  if (wj == 0.0)
    throw std::invalid_argument("required value undefined for a zero-weight child");

  const auto& w = params.weights;
  if (kind == LogicKind::Disjunction) {
    double total = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k)
      total += masked_input(child_values[k], w[k]) * std::abs(w[k]);
    const double c_out = masked_input(child_values[j], w[j]) * wj;
    const double s_out = total - c_out;
    return clamp01((t - s_out) / wj);
  }
  double total = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k)
    total += (1.0 - masked_input(child_values[k], w[k])) * std::abs(w[k]);
  const double c_out = (1.0 - masked_input(child_values[j], w[j])) * wj;
  const double s_out = total - c_out;
  return 1.0 - clamp01((1.0 - t - s_out) / wj);
}

}  // namespace nrn
