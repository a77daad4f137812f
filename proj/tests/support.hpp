#pragma once

// Shared generators and independent oracles for the test suites.

#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "nrn/nrn.hpp"

namespace nrn_test {

using nrn::Matrix;

// Dataset of n rows, six uniform features, label (x0>0.5 & x1<0.3) | x4>0.8.
inline nrn::Dataset rule_dataset(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  nrn::Dataset d;
  for (int i = 0; i < 6; ++i) d.feature_names.push_back("x" + std::to_string(i));
  d.features = Matrix(n, 6);
  d.labels.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < 6; ++c) d.features(r, c) = u(rng);
    d.labels[r] = ((d.features(r, 0) > 0.5 && d.features(r, 1) < 0.3) || d.features(r, 4) > 0.8) ? 1 : 0;
  }
  return d;
}

inline std::string to_csv(const nrn::Dataset& d, const std::string& label = "label") {
  std::string s;
  for (const auto& n : d.feature_names) s += n + ",";
  s += label + "\n";
  char buf[64];
  for (std::size_t r = 0; r < d.features.rows; ++r) {
    for (std::size_t c = 0; c < d.features.cols; ++c) {
      std::snprintf(buf, sizeof buf, "%.17g,", d.features(r, c));
      s += buf;
    }
    s += std::to_string(d.labels[r]) + "\n";
  }
  return s;
}

// Everything a trained synthetic model needs for downstream checks.
struct TrainedRuleModel {
  nrn::Dataset train, val, test;
  nrn::Model model;
  nrn::TrainResult result;
};

inline TrainedRuleModel train_rule_model(std::uint64_t seed, std::size_t n = 2000) {
  TrainedRuleModel t;
  const auto data = rule_dataset(n, seed);
  const auto split = nrn::split_dataset(n, seed);
  t.train = data.subset(split.train);
  t.val = data.subset(split.val);
  t.test = data.subset(split.test);
  auto pipe = nrn::PredicatePipeline::fit(t.train, nrn::BinarizeMode::Replace, {}, seed);
  auto net = nrn::init_network(data.feature_names, pipe.predicates, {}, seed);
  nrn::TrainConfig cfg;
  cfg.seed = seed;
  nrn::TrainData td{pipe.transform(t.train.features), t.train.labels, pipe.transform(t.val.features),
                    t.val.labels};
  t.result = nrn::train(std::move(net), td, cfg);
  t.model = nrn::Model{std::move(pipe), t.result.network, {"label", seed, "", t.result.best_epoch,
                                                            t.result.best_val_auc}};
  return t;
}

// ---------------------------------------------------------------------------
// Boolean oracle for networks with unit weights: each node is read as a
// plain AND/OR over literals (x or NOT x by weight sign), evaluated with
// bool arithmetic only.

inline bool boolean_node(const nrn::Network& net, std::size_t layer, std::size_t node,
                         const std::vector<bool>& assignment) {
  const auto& blk = net.blocks[layer];
  auto w = blk.weights.row(0, node);
  auto in = blk.inputs_of(0, node);
  const bool conj = blk.kind == nrn::LogicKind::Conjunction;
  bool acc = conj;
  for (std::size_t i = 0; i < w.size(); ++i) {
    bool v = layer == 0 ? assignment[in[i]] : boolean_node(net, layer - 1, in[i], assignment);
    if (w[i] < 0) v = !v;
    acc = conj ? (acc && v) : (acc || v);
  }
  return acc;
}

inline bool boolean_network(const nrn::Network& net, const std::vector<bool>& assignment) {
  return boolean_node(net, net.blocks.size() - 1, 0, assignment);
}

// Random network with |w| = 1 and random signs.
inline nrn::Network random_unit_network(std::mt19937_64& rng, std::size_t n_predicates, std::size_t n_layers) {
  std::vector<std::string> names;
  std::vector<nrn::Predicate> preds;
  for (std::size_t i = 0; i < n_predicates; ++i) {
    names.push_back("p" + std::to_string(i));
    preds.push_back({i, names.back(), std::nullopt, nrn::MinMaxScaler{0.0, 1.0}});
  }
  nrn::ArchitectureConfig cfg;
  cfg.n_layers = n_layers;
  cfg.layer_sizes.clear();
  std::size_t width = n_predicates;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const std::size_t size = l + 1 == n_layers ? 1 : std::uniform_int_distribution<std::size_t>(1, 5)(rng);
    cfg.layer_sizes.push_back(size);
    width = size;
  }
  (void)width;
  cfg.n_selected_features_input = std::uniform_int_distribution<std::size_t>(1, n_predicates)(rng);
  cfg.n_selected_features_internal = 1;
  cfg.n_selected_features_output = 1;
  if (n_layers > 1) {
    cfg.n_selected_features_internal =
        std::uniform_int_distribution<std::size_t>(1, cfg.layer_sizes[0])(rng);
    for (std::size_t l = 1; l < n_layers; ++l)
      cfg.n_selected_features_internal = std::min(cfg.n_selected_features_internal, cfg.layer_sizes[l - 1]);
  }
  cfg.normal_form = std::bernoulli_distribution(0.5)(rng) ? nrn::NormalForm::Dnf : nrn::NormalForm::Cnf;
  auto net = nrn::init_network(names, preds, cfg, rng());
  for (auto& b : net.blocks)
    for (auto& w : b.weights.data()) w = std::bernoulli_distribution(0.5)(rng) ? 1.0 : -1.0;
  return net;
}

// ---------------------------------------------------------------------------
// Random explanation trees

struct TreeGen {
  std::mt19937_64& rng;
  std::size_t n_vars;
  // Thresholds: 0.5 over {0,1}-valued features gives boolean variables;
  // otherwise a small grid so merges actually happen.
  bool boolean = true;
  std::size_t leaves_left = 16;

  nrn::ThresholdCondition condition() {
    const std::size_t f = std::uniform_int_distribution<std::size_t>(0, n_vars - 1)(rng);
    const auto op = static_cast<nrn::CompareOp>(std::uniform_int_distribution<int>(0, 3)(rng));
    const double t = boolean ? 0.5 : 0.25 * std::uniform_int_distribution<int>(0, 4)(rng);
    return {f, "v" + std::to_string(f), op, t};
  }

  nrn::ExplanationNode node(int depth) {
    using nrn::ExplanationNode;
    std::uniform_int_distribution<int> pick(0, 9);
    const int r = pick(rng);
    if (depth >= 5 || leaves_left <= 1 || r < 3) {
      if (leaves_left > 0) --leaves_left;
      return ExplanationNode::leaf(condition());
    }
    if (r < 5) return ExplanationNode::negation(node(depth + 1));
    const std::size_t k = std::uniform_int_distribution<std::size_t>(1, 4)(rng);
    std::vector<ExplanationNode> kids;
    for (std::size_t i = 0; i < k && leaves_left > 0; ++i) kids.push_back(node(depth + 1));
    if (kids.empty()) kids.push_back(ExplanationNode::leaf(condition()));
    return r < 8 ? ExplanationNode::all_of(std::move(kids)) : ExplanationNode::any_of(std::move(kids));
  }
};

// Points that probe every threshold of a tree: grid of thresholds and
// their neighbours per feature, combined randomly.
inline std::vector<std::vector<double>> probe_points(std::mt19937_64& rng, std::size_t n_vars, std::size_t count) {
  const std::vector<double> grid{-0.1, 0.0, 0.1, 0.25, 0.3, 0.5, 0.6, 0.75, 0.9, 1.0, 1.1};
  std::vector<std::vector<double>> pts;
  std::uniform_int_distribution<std::size_t> g(0, grid.size() - 1);
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<double> p(n_vars);
    for (auto& v : p) v = grid[g(rng)];
    pts.push_back(std::move(p));
  }
  return pts;
}

inline std::size_t count_nodes(const nrn::ExplanationNode& n, nrn::NodeType t) {
  std::size_t k = n.type == t ? 1 : 0;
  for (const auto& c : n.children) k += count_nodes(c, t);
  return k;
}

inline bool has_single_child_connective(const nrn::ExplanationNode& n) {
  if (n.is_connective() && n.children.size() == 1) return true;
  for (const auto& c : n.children)
    if (has_single_child_connective(c)) return true;
  return false;
}

inline bool has_adjacent_same_type(const nrn::ExplanationNode& n) {
  for (const auto& c : n.children) {
    if (n.is_connective() && c.type == n.type) return true;
    if (has_adjacent_same_type(c)) return true;
  }
  return false;
}

inline bool has_duplicate_bounds(const nrn::ExplanationNode& n) {
  std::vector<std::pair<std::size_t, bool>> seen;
  for (const auto& c : n.children) {
    if (c.type == nrn::NodeType::Leaf) {
      auto key = std::make_pair(c.condition->feature_index, nrn::is_upper_bound(c.condition->op));
      if (std::find(seen.begin(), seen.end(), key) != seen.end()) return true;
      seen.push_back(key);
    }
    if (has_duplicate_bounds(c)) return true;
  }
  return false;
}

inline std::vector<std::string> leaf_texts(const nrn::ExplanationNode& n) {
  if (n.type == nrn::NodeType::Leaf) return {n.condition->to_string()};
  std::vector<std::string> out;
  for (const auto& c : n.children) {
    auto sub = leaf_texts(c);
    out.insert(out.end(), sub.begin(), sub.end());
  }
  return out;
}

inline std::set<std::size_t> leaf_features(const nrn::ExplanationNode& n) {
  if (n.type == nrn::NodeType::Leaf) return {n.condition->feature_index};
  std::set<std::size_t> out;
  for (const auto& c : n.children) out.merge(leaf_features(c));
  return out;
}

// Pairwise-count AUC oracle.
inline double pairwise_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        den += 1.0;
        num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
  return num / den;
}

}  // namespace nrn_test
