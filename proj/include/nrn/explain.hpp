#pragma once

// Rule extraction from a trained network and the rewrite engine that turns
// the extracted tree into a short conjunction of threshold rules.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "nrn/common.hpp"
#include "nrn/logic.hpp"
#include "nrn/network.hpp"

namespace nrn {

enum class NodeType { And, Or, Not, Leaf };

inline std::string_view to_string(NodeType t) {
  switch (t) {
    case NodeType::And: return "And";
    case NodeType::Or: return "Or";
    case NodeType::Not: return "Not";
    case NodeType::Leaf: return "Leaf";
  }
  return "?";
}

inline NodeType parse_node_type(std::string_view s) {
  if (s == "And") return NodeType::And;
  if (s == "Or") return NodeType::Or;
  if (s == "Not") return NodeType::Not;
  if (s == "Leaf") return NodeType::Leaf;
  throw std::invalid_argument("unknown explanation node type '" + std::string(s) + "'");
}

struct ExplanationNode {
  NodeType type = NodeType::And;
  std::vector<ExplanationNode> children;
  std::optional<ThresholdCondition> condition;

  static ExplanationNode leaf(ThresholdCondition c) { return {NodeType::Leaf, {}, std::move(c)}; }
  static ExplanationNode all_of(std::vector<ExplanationNode> c) { return {NodeType::And, std::move(c), {}}; }
  static ExplanationNode any_of(std::vector<ExplanationNode> c) { return {NodeType::Or, std::move(c), {}}; }
  static ExplanationNode negation(ExplanationNode c) { return {NodeType::Not, {std::move(c)}, {}}; }

  bool is_connective() const { return type == NodeType::And || type == NodeType::Or; }

  friend bool operator==(const ExplanationNode&, const ExplanationNode&) = default;
};

/// Operator-name grammar: AND(a, b, NOT(c)); leaves print as "name op value".
inline std::string to_text(const ExplanationNode& n) {
  if (n.type == NodeType::Leaf) return n.condition->to_string();
  std::string out = n.type == NodeType::And ? "AND(" : n.type == NodeType::Or ? "OR(" : "NOT(";
  for (std::size_t i = 0; i < n.children.size(); ++i) {
    if (i) out += ", ";
    out += to_text(n.children[i]);
  }
  return out + ")";
}

inline nlohmann::json to_json(const ExplanationNode& n) {
  nlohmann::json j;
  j["type"] = std::string(to_string(n.type));
  if (n.type == NodeType::Leaf) {
    j["feature"] = n.condition->feature;
    j["feature_index"] = n.condition->feature_index;
    j["op"] = std::string(to_string(n.condition->op));
    j["threshold"] = n.condition->threshold;
    return j;
  }
  j["children"] = nlohmann::json::array();
  for (const auto& c : n.children) j["children"].push_back(to_json(c));
  return j;
}

inline ExplanationNode explanation_from_json(const nlohmann::json& j) {
  ExplanationNode n;
  n.type = parse_node_type(j.at("type").get<std::string>());
  if (n.type == NodeType::Leaf) {
    n.condition = ThresholdCondition{j.at("feature_index").get<std::size_t>(),
                                     j.at("feature").get<std::string>(),
                                     parse_compare_op(j.at("op").get<std::string>()),
                                     j.at("threshold").get<double>()};
    return n;
  }
  for (const auto& c : j.at("children")) n.children.push_back(explanation_from_json(c));
  return n;
}

/// Crisp evaluation against raw feature values. Empty AND is true, empty OR false.
inline bool evaluate(const ExplanationNode& n, std::span<const double> raw) {
  switch (n.type) {
    case NodeType::Leaf: return n.condition->holds_for(raw);
    case NodeType::Not: return !evaluate(n.children.at(0), raw);
    case NodeType::And:
      return std::all_of(n.children.begin(), n.children.end(),
                         [&](const auto& c) { return evaluate(c, raw); });
    case NodeType::Or:
      return std::any_of(n.children.begin(), n.children.end(),
                         [&](const auto& c) { return evaluate(c, raw); });
  }
  return false;
}

inline std::size_t leaf_count(const ExplanationNode& n) {
  if (n.type == NodeType::Leaf) return 1;
  std::size_t k = 0;
  for (const auto& c : n.children) k += leaf_count(c);
  return k;
}

inline std::size_t not_count(const ExplanationNode& n) {
  std::size_t k = n.type == NodeType::Not ? 1 : 0;
  for (const auto& c : n.children) k += not_count(c);
  return k;
}

// ---------------------------------------------------------------------------
// Rewrite rules

ExplanationNode negate_node(const ExplanationNode& n);

/// Moves every negation onto the leaves (De Morgan, double negation and
/// operator flips on leaf conditions).
inline ExplanationNode push_negations_down(const ExplanationNode& n) {
  switch (n.type) {
    case NodeType::Leaf: return n;
    case NodeType::Not: return negate_node(n.children.at(0));
    default: {
      ExplanationNode out{n.type, {}, {}};
      out.children.reserve(n.children.size());
      for (const auto& c : n.children) out.children.push_back(push_negations_down(c));
      return out;
    }
  }
}

inline ExplanationNode negate_node(const ExplanationNode& n) {
  switch (n.type) {
    case NodeType::Leaf: return ExplanationNode::leaf(n.condition->negated());
    case NodeType::Not: return push_negations_down(n.children.at(0));
    default: {
      ExplanationNode out{n.type == NodeType::And ? NodeType::Or : NodeType::And, {}, {}};
      out.children.reserve(n.children.size());
      for (const auto& c : n.children) out.children.push_back(negate_node(c));
      return out;
    }
  }
}

/// AND(a, AND(b, c)) -> AND(a, b, c), same for OR, applied bottom-up.
inline ExplanationNode collapse_repeated_operands(const ExplanationNode& n) {
  if (n.type == NodeType::Leaf) return n;
  ExplanationNode out{n.type, {}, {}};
  for (const auto& c : n.children) {
    auto cc = collapse_repeated_operands(c);
    if (n.is_connective() && cc.type == n.type) {
      for (auto& g : cc.children) out.children.push_back(std::move(g));
    } else {
      out.children.push_back(std::move(cc));
    }
  }
  return out;
}

namespace detail {

/// Merges two same-feature same-direction conditions under AND (tighter
/// wins) or OR (looser wins). At equal thresholds the strict operator is the
/// tighter one.
inline ThresholdCondition merge_bounds(const ThresholdCondition& a, const ThresholdCondition& b,
                                       bool conjunction) {
  const bool upper = is_upper_bound(a.op);
  // "tighter" for an upper bound = smaller threshold; for a lower bound = larger.
  auto tighter = [&](const ThresholdCondition& x, const ThresholdCondition& y) {
    if (x.threshold != y.threshold) return upper ? x.threshold < y.threshold : x.threshold > y.threshold;
    return is_strict(x.op) && !is_strict(y.op);
  };
  const bool a_tighter = tighter(a, b);
  if (conjunction) return a_tighter ? a : (tighter(b, a) ? b : a);
  return a_tighter ? b : (tighter(b, a) ? a : a);
}

}  // namespace detail

/// Within each AND/OR node, leaf conditions on the same feature and in the
/// same direction are merged into one (min/max of thresholds).
inline ExplanationNode remove_redundant_predicates(const ExplanationNode& n) {
  if (n.type == NodeType::Leaf) return n;
  ExplanationNode out{n.type, {}, {}};
  std::vector<ExplanationNode> kids;
  kids.reserve(n.children.size());
  for (const auto& c : n.children) kids.push_back(remove_redundant_predicates(c));
  if (!n.is_connective()) {
    out.children = std::move(kids);
    return out;
  }
  const bool conj = n.type == NodeType::And;
  std::map<std::pair<std::size_t, bool>, std::size_t> slot;  // (feature, upper) -> index in out
  for (auto& c : kids) {
    if (c.type != NodeType::Leaf) {
      out.children.push_back(std::move(c));
      continue;
    }
    const auto key = std::make_pair(c.condition->feature_index, is_upper_bound(c.condition->op));
    auto it = slot.find(key);
    if (it == slot.end()) {
      slot.emplace(key, out.children.size());
      out.children.push_back(std::move(c));
    } else {
      auto& existing = *out.children[it->second].condition;
      existing = detail::merge_bounds(existing, *c.condition, conj);
    }
  }
  return out;
}

/// AND(x) -> x, OR(x) -> x.
inline ExplanationNode collapse_single_operands(const ExplanationNode& n) {
  if (n.type == NodeType::Leaf) return n;
  ExplanationNode out{n.type, {}, {}};
  out.children.reserve(n.children.size());
  for (const auto& c : n.children) out.children.push_back(collapse_single_operands(c));
  if (out.is_connective() && out.children.size() == 1) return std::move(out.children.front());
  return out;
}

/// Sample-independent part of the pipeline: negations to the leaves, then
/// flattening, threshold merging and single-operand removal repeated until
/// the tree stops changing.
inline ExplanationNode simplify_tree(const ExplanationNode& root) {
  ExplanationNode n = push_negations_down(root);
  for (;;) {
    ExplanationNode next = collapse_repeated_operands(n);
    next = remove_redundant_predicates(next);
    next = collapse_single_operands(next);
    next = remove_redundant_predicates(next);
    if (next == n) return n;
    n = std::move(next);
  }
}

struct SampleExplanation {
  std::vector<ThresholdCondition> rules;
  TruthValue confidence = 0.0;

  ExplanationNode as_tree() const {
    std::vector<ExplanationNode> kids;
    for (const auto& r : rules) kids.push_back(ExplanationNode::leaf(r));
    return ExplanationNode::all_of(std::move(kids));
  }
  std::string to_text() const { return nrn::to_text(as_tree()); }
};

namespace detail {
inline void collect_true_conditions(const ExplanationNode& n, std::span<const double> raw,
                                    std::vector<ThresholdCondition>& out) {
  switch (n.type) {
    case NodeType::Leaf:
      if (n.condition->holds_for(raw)) out.push_back(*n.condition);
      return;
    case NodeType::And:
      for (const auto& c : n.children) collect_true_conditions(c, raw, out);
      return;
    case NodeType::Or:
      for (const auto& c : n.children)
        if (evaluate(c, raw)) collect_true_conditions(c, raw, out);
      return;
    case NodeType::Not:
      return;
  }
}
}  // namespace detail

/// Keeps only what holds for the sample: OR branches that evaluate false are
/// dropped, and the surviving true conditions are joined into one AND.
inline ExplanationNode collapse_sample_explanation(const ExplanationNode& n,
                                                   std::span<const double> raw) {
  std::vector<ThresholdCondition> conds;
  detail::collect_true_conditions(n, raw, conds);
  std::vector<ExplanationNode> kids;
  for (auto& c : conds) kids.push_back(ExplanationNode::leaf(std::move(c)));
  return ExplanationNode::all_of(std::move(kids));
}

/// Full sample pipeline ending in a single conjunction of rules true for
/// the sample.
inline SampleExplanation simplify(const ExplanationNode& root, std::span<const double> raw) {
  ExplanationNode n = push_negations_down(root);
  n = collapse_repeated_operands(n);
  n = remove_redundant_predicates(n);
  n = collapse_single_operands(n);
  n = remove_redundant_predicates(n);
  n = collapse_sample_explanation(n, raw);
  n = remove_redundant_predicates(n);
  SampleExplanation out;
  for (const auto& c : n.children) out.rules.push_back(*c.condition);
  return out;
}

// ---------------------------------------------------------------------------
// Extraction from a network

enum class InclusionTest {
  /// child masked value times |w| against the required value (as printed)
  WeightedValue,
  /// child masked value alone against the required value
  Value,
};

struct ExplainOptions {
  InclusionTest inclusion = InclusionTest::WeightedValue;
  /// Keep only edges on root-to-leaf paths whose |weight| product is in the
  /// top fraction; 1 keeps everything.
  double weight_quantile = 1.0;
};

struct ExplainAudit {
  /// Children where the two inclusion tests disagree.
  std::size_t inclusion_disagreements = 0;
  std::size_t children_visited = 0;
};

namespace detail {

/// Per-node values for one "virtual sample": element 0 holds predicate
/// values, element k + 1 the outputs of block k.
using NodeValues = std::vector<std::vector<double>>;

inline NodeValues node_values_for(const Network& net, std::span<const double> predicate_row) {
  Matrix m(1, predicate_row.size());
  std::copy(predicate_row.begin(), predicate_row.end(), m.data.begin());
  const auto layers = forward_layers(net, m);
  NodeValues v;
  for (const auto& t : layers) v.emplace_back(t.data().begin(), t.data().end());
  return v;
}

inline NodeValues mean_node_values(const Network& net, const Matrix& predicate_rows) {
  const auto layers = forward_layers(net, predicate_rows);
  NodeValues v;
  for (const auto& t : layers) {
    std::vector<double> mean(t.dim2(), 0.0);
    for (std::size_t b = 0; b < t.dim0(); ++b)
      for (std::size_t i = 0; i < t.dim2(); ++i) mean[i] += t(b, 0, i);
    for (auto& x : mean) x /= static_cast<double>(std::max<std::size_t>(1, t.dim0()));
    v.push_back(std::move(mean));
  }
  return v;
}

/// Largest |w| product from each node down to any leaf, per layer.
inline std::vector<std::vector<double>> best_downstream(const Network& net) {
  std::vector<std::vector<double>> best(net.blocks.size() + 1);
  best[0].assign(net.predicates.size(), 1.0);
  for (std::size_t k = 0; k < net.blocks.size(); ++k) {
    const auto& blk = net.blocks[k];
    best[k + 1].assign(blk.shape.out_size, 0.0);
    for (std::size_t o = 0; o < blk.shape.out_size; ++o) {
      auto w = blk.weights.row(0, o);
      auto in = blk.inputs_of(0, o);
      for (std::size_t i = 0; i < w.size(); ++i)
        best[k + 1][o] = std::max(best[k + 1][o], std::abs(w[i]) * best[k][in[i]]);
    }
  }
  return best;
}

inline void collect_path_products(const Network& net, std::size_t layer, std::size_t node,
                                  double prefix, std::vector<double>& out) {
  const auto& blk = net.blocks[layer - 1];
  auto w = blk.weights.row(0, node);
  auto in = blk.inputs_of(0, node);
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double p = prefix * std::abs(w[i]);
    if (layer == 1)
      out.push_back(p);
    else
      collect_path_products(net, layer - 1, in[i], p, out);
  }
}

class Extractor {
 public:
  Extractor(const Network& net, NodeValues values, const ExplainOptions& opts, bool test_inclusion,
            ExplainAudit* audit)
      : net_(net), values_(std::move(values)), opts_(opts), test_inclusion_(test_inclusion),
        audit_(audit) {
    if (!(opts.weight_quantile > 0.0 && opts.weight_quantile <= 1.0))
      throw std::invalid_argument("weight_quantile must lie in (0,1]");
    best_ = best_downstream(net);
    std::vector<double> products;
    collect_path_products(net, net.blocks.size(), 0, 1.0, products);
    cutoff_ = percentile(products, 1.0 - opts.weight_quantile);
  }

  std::optional<ExplanationNode> run(TruthValue target, bool negate) {
    return expl(net_.blocks.size(), 0, target, negate, 1.0);
  }

 private:
  static bool add_not(double w, bool negate) { return (w < 0 && !negate) || (w >= 0 && negate); }

  std::string child_name(std::size_t layer, std::size_t idx) const {
    return layer == 1 ? net_.predicates[idx].name : std::string();
  }

  std::optional<ExplanationNode> render_leaf(const Predicate& p, double v, bool wrapped) const {
    // "P >= v" with v <= 0 holds for every sample and says nothing.
    if (!wrapped && v <= 0.0) return std::nullopt;
    ExplanationNode leaf;
    if (p.condition) {
      leaf = ExplanationNode::leaf(*p.condition);
    } else {
      const MinMaxScaler s = p.scaler.value_or(MinMaxScaler{});
      leaf = ExplanationNode::leaf({p.feature_index, net_.feature_names[p.feature_index],
                                    CompareOp::GreaterEqual, s.inverse(v)});
    }
    return wrapped ? ExplanationNode::negation(std::move(leaf)) : leaf;
  }

  std::optional<ExplanationNode> expl(std::size_t layer, std::size_t node, TruthValue t, bool n,
                                      double prefix) {
    const auto& blk = net_.blocks[layer - 1];
    const NodeParams params = blk.node_params(0, node);
    const auto in = blk.inputs_of(0, node);
    std::vector<double> child_values(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) child_values[i] = values_[layer - 1][in[i]];
    const TruthValue target = n ? 1.0 - t : t;

    std::vector<std::size_t> order(in.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double wa = std::abs(params.weights[a]), wb = std::abs(params.weights[b]);
      if (wa != wb) return wa > wb;
      return child_name(layer, in[a]) < child_name(layer, in[b]);
    });

    std::vector<ExplanationNode> items;
    for (std::size_t j : order) {
      const double w = params.weights[j];
      if (w == 0.0) continue;
      const double path = prefix * std::abs(w);
      if (path * best_[layer - 1][in[j]] < cutoff_) continue;

      const double vc = required_child_value(blk.kind, params, child_values, target, j);
      if (test_inclusion_) {
        const double masked = masked_input(child_values[j], w);
        const double weighted = masked * std::abs(w);
        auto passes = [&](double lhs) { return n ? lhs < vc : (lhs >= vc && vc > 0.0); };
        const bool m_weighted = passes(weighted), m_value = passes(masked);
        if (audit_) {
          ++audit_->children_visited;
          if (m_weighted != m_value) ++audit_->inclusion_disagreements;
        }
        if (!(opts_.inclusion == InclusionTest::WeightedValue ? m_weighted : m_value)) continue;
      }

      if (layer > 1) {
        const bool child_n = w < 0 ? !n : n;
        auto sub = expl(layer - 1, in[j], vc, child_n, path);
        if (!sub) continue;
        items.push_back(add_not(w, child_n) ? ExplanationNode::negation(std::move(*sub))
                                            : std::move(*sub));
      } else {
        const double v = w < 0 ? 1.0 - vc : vc;
        auto leaf = render_leaf(net_.predicates[in[j]], v, add_not(w, n));
        if (leaf) items.push_back(std::move(*leaf));
      }
    }
    if (items.empty()) return std::nullopt;
    return ExplanationNode{blk.kind == LogicKind::Conjunction ? NodeType::And : NodeType::Or,
                           std::move(items), {}};
  }

  const Network& net_;
  NodeValues values_;
  ExplainOptions opts_;
  bool test_inclusion_;
  ExplainAudit* audit_;
  std::vector<std::vector<double>> best_;
  double cutoff_ = 0.0;
};

}  // namespace detail

/// Unsimplified explanation of one sample (predicate-space row). Returns
/// nullopt when no child meets its required value.
inline std::optional<ExplanationNode> explain_sample(const Network& net,
                                                     std::span<const double> predicate_row,
                                                     const ExplainOptions& opts = {},
                                                     ExplainAudit* audit = nullptr) {
  if (net.blocks.empty()) throw std::invalid_argument("cannot explain an empty network");
  auto values = detail::node_values_for(net, predicate_row);
  const TruthValue t = values.back().at(0);
  return detail::Extractor(net, std::move(values), opts, true, audit).run(t, false);
}

/// Sample explanation simplified down to one conjunction, with the network
/// output as its confidence.
inline SampleExplanation explain_and_simplify(const Network& net,
                                              std::span<const double> predicate_row,
                                              std::span<const double> raw_row,
                                              const ExplainOptions& opts = {},
                                              ExplainAudit* audit = nullptr) {
  const auto tree = explain_sample(net, predicate_row, opts, audit);
  SampleExplanation out;
  if (tree) out = simplify(*tree, raw_row);
  out.confidence = detail::node_values_for(net, predicate_row).back().at(0);
  return out;
}

enum class ClassView { Positive, Negative };

/// Model-level explanation against a target taken from the prediction
/// distribution. Child values are the mean node activations over
/// predicate_rows; every edge in the weight-filtered sub-graph is kept.
/// The negative view explains the negated root. Returns an empty AND when
/// nothing survives.
inline ExplanationNode global_explanation(const Network& net, const Matrix& predicate_rows,
                                          std::span<const double> predictions,
                                          double confidence_percentile, double weight_quantile,
                                          ClassView view = ClassView::Positive) {
  if (!(weight_quantile > 0.0 && weight_quantile <= 1.0))
    throw std::invalid_argument("weight_quantile must lie in (0,1]");
  if (predictions.empty()) throw std::invalid_argument("global explanation needs predictions");
  if (predicate_rows.rows == 0) throw std::invalid_argument("global explanation needs data rows");
  const double t = percentile(std::vector<double>(predictions.begin(), predictions.end()),
                              confidence_percentile / 100.0);
  ExplainOptions opts;
  opts.weight_quantile = weight_quantile;
  detail::Extractor ex(net, detail::mean_node_values(net, predicate_rows), opts, false, nullptr);
  auto tree = ex.run(t, view == ClassView::Negative);
  if (!tree) return ExplanationNode::all_of({});
  return simplify_tree(*tree);
}

// ---------------------------------------------------------------------------
// Feature importance

/// Sum over root-to-leaf paths of the product of |weights|, accumulated on
/// the raw feature behind each leaf predicate.
inline std::vector<double> feature_importance(const Network& net) {
  std::vector<double> importance(net.feature_names.size(), 0.0);
  if (net.blocks.empty()) return importance;
  std::vector<double> mass(net.root().shape.out_size, 1.0);
  for (std::size_t k = net.blocks.size(); k-- > 0;) {
    const auto& blk = net.blocks[k];
    std::vector<double> below(k > 0 ? net.blocks[k - 1].shape.out_size : 0, 0.0);
    for (std::size_t o = 0; o < blk.shape.out_size; ++o) {
      auto w = blk.weights.row(0, o);
      auto in = blk.inputs_of(0, o);
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double m = mass[o] * std::abs(w[i]);
        if (k > 0)
          below[in[i]] += m;
        else
          importance[net.predicates[in[i]].feature_index] += m;
      }
    }
    mass = std::move(below);
  }
  return importance;
}

}  // namespace nrn
