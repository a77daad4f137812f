#pragma once

// Neural reasoning network: predicate leaves feeding alternating And/Or
// blocks that narrow down to a single root node.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nrn/common.hpp"
#include "nrn/logic.hpp"

namespace nrn {

enum class NormalForm { Cnf, Dnf };

inline std::string_view to_string(NormalForm nf) { return nf == NormalForm::Cnf ? "cnf" : "dnf"; }

inline NormalForm parse_normal_form(std::string_view s) {
  if (s == "cnf") return NormalForm::Cnf;
  if (s == "dnf") return NormalForm::Dnf;
  throw std::invalid_argument("normal_form must be cnf or dnf, got '" + std::string(s) + "'");
}

/// Leaf binding one predicate-space column to a raw feature.
///
/// Binarized predicates carry the raw condition they encode ("f <= t").
/// Pass-through predicates carry the scaler used to map the raw feature into
/// [0,1] so explanations can print thresholds in raw units.
struct Predicate {
  std::size_t feature_index = 0;
  std::string name;
  std::optional<ThresholdCondition> condition;
  std::optional<MinMaxScaler> scaler;

  bool binarized() const { return condition.has_value(); }
  friend bool operator==(const Predicate&, const Predicate&) = default;
};

struct LogicBlock {
  LogicKind kind = LogicKind::Conjunction;
  BlockShape shape;
  Tensor3 weights;                        // (C, O, I)
  std::vector<double> betas;              // (C, O)
  std::vector<std::size_t> connectivity;  // (C, O, I) indices into the previous layer

  std::span<const std::size_t> inputs_of(std::size_t c, std::size_t o) const {
    return {connectivity.data() + (c * shape.out_size + o) * shape.in_size, shape.in_size};
  }
  std::span<std::size_t> inputs_of(std::size_t c, std::size_t o) {
    return {connectivity.data() + (c * shape.out_size + o) * shape.in_size, shape.in_size};
  }
  NodeParams node_params(std::size_t c, std::size_t o) const {
    auto w = weights.row(c, o);
    return {std::vector<double>(w.begin(), w.end()), betas[c * shape.out_size + o]};
  }

  friend bool operator==(const LogicBlock&, const LogicBlock&) = default;
};

struct Network {
  std::vector<std::string> feature_names;
  std::vector<Predicate> predicates;
  std::vector<LogicBlock> blocks;
  NormalForm normal_form = NormalForm::Dnf;
  std::size_t channels = 1;

  const LogicBlock& root() const { return blocks.back(); }

  /// Throws std::logic_error describing the first broken structural invariant.
  void validate() const {
    if (blocks.empty()) throw std::logic_error("network has no blocks");
    if (predicates.empty()) throw std::logic_error("network has no predicates");
    for (const auto& p : predicates)
      if (p.feature_index >= feature_names.size())
        throw std::logic_error("predicate '" + p.name + "' references unknown feature");
    std::size_t width = predicates.size();
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const auto& blk = blocks[b];
      const std::string where = "block " + std::to_string(b) + ": ";
      blk.shape.validate();
      if (blk.shape.channels != channels) throw std::logic_error(where + "channel mismatch");
      if (b > 0 && blk.kind == blocks[b - 1].kind)
        throw std::logic_error(where + "block kinds must alternate");
      if (blk.weights.dim0() != blk.shape.channels || blk.weights.dim1() != blk.shape.out_size ||
          blk.weights.dim2() != blk.shape.in_size)
        throw std::logic_error(where + "weight tensor shape mismatch");
      if (blk.betas.size() != blk.shape.channels * blk.shape.out_size)
        throw std::logic_error(where + "bias shape mismatch");
      if (blk.connectivity.size() != blk.shape.weight_count())
        throw std::logic_error(where + "connectivity shape mismatch");
      for (std::size_t c = 0; c < blk.shape.channels; ++c)
        for (std::size_t o = 0; o < blk.shape.out_size; ++o) {
          auto in = blk.inputs_of(c, o);
          std::vector<std::size_t> sorted(in.begin(), in.end());
          std::sort(sorted.begin(), sorted.end());
          if (!sorted.empty() && sorted.back() >= width)
            throw std::logic_error(where + "connectivity index out of range");
          if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw std::logic_error(where + "duplicate input within one node");
        }
      width = blk.shape.out_size;
    }
    if (root().shape.out_size != 1) throw std::logic_error("root block must have one output");
  }
};

struct ArchitectureConfig {
  std::size_t n_layers = 2;
  std::vector<std::size_t> layer_sizes{16, 8};
  std::size_t n_selected_features_input = 8;
  std::size_t n_selected_features_internal = 4;
  std::size_t n_selected_features_output = 4;
  NormalForm normal_form = NormalForm::Dnf;
  double weight_init = 0.2;
  bool add_negations = true;
};

namespace detail {

/// k distinct indices from [0, n), in draw order (partial Fisher-Yates).
inline std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k,
                                                           std::mt19937_64& rng) {
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(k);
  return pool;
}

inline double initial_weight(double w0, bool add_negations, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> mag(0.01 * w0, w0);
  double w = mag(rng);
  if (add_negations && std::bernoulli_distribution(0.5)(rng)) w = -w;
  return w;
}

}  // namespace detail

/// Builds the alternating block stack. Layer 0 is a conjunction for dnf and a
/// disjunction for cnf. A root block of size one is appended unless the last
/// configured layer already has a single node. Each layer selects at most as
/// many inputs as the layer below provides.
inline Network init_network(std::vector<std::string> feature_names,
                            std::vector<Predicate> predicates, const ArchitectureConfig& config,
                            std::uint64_t seed) {
  if (config.n_layers == 0) throw std::invalid_argument("n_layers must be >= 1");
  if (config.layer_sizes.size() != config.n_layers)
    throw std::invalid_argument("layer_sizes must list one size per layer");
  if (!(config.weight_init > 0.0)) throw std::invalid_argument("weight_init must be > 0");

  Network net;
  net.feature_names = std::move(feature_names);
  net.predicates = std::move(predicates);
  net.normal_form = config.normal_form;

  struct LayerPlan {
    std::size_t size, selected;
  };
  std::vector<LayerPlan> plan;
  for (std::size_t l = 0; l < config.n_layers; ++l)
    plan.push_back({config.layer_sizes[l], l == 0 ? config.n_selected_features_input
                                                  : config.n_selected_features_internal});
  if (plan.back().size != 1) plan.push_back({1, config.n_selected_features_output});

  std::mt19937_64 rng(seed);
  LogicKind kind = config.normal_form == NormalForm::Dnf ? LogicKind::Conjunction
                                                         : LogicKind::Disjunction;
  std::size_t width = net.predicates.size();
  for (std::size_t l = 0; l < plan.size(); ++l) {
    const std::size_t size = plan[l].size, selected = std::min(plan[l].selected, width);
    if (size == 0) throw std::invalid_argument("layer sizes must be >= 1");
    if (selected == 0) throw std::invalid_argument("layer " + std::to_string(l) + " selects no inputs");
    LogicBlock blk;
    blk.kind = kind;
    blk.shape = {1, size, selected};
    blk.weights = Tensor3(1, size, selected);
    blk.betas.assign(size, 1.0);
    blk.connectivity.reserve(size * selected);
    for (std::size_t o = 0; o < size; ++o) {
      auto idx = detail::sample_without_replacement(width, selected, rng);
      blk.connectivity.insert(blk.connectivity.end(), idx.begin(), idx.end());
      for (std::size_t i = 0; i < selected; ++i)
        blk.weights(0, o, i) = detail::initial_weight(config.weight_init, config.add_negations, rng);
    }
    net.blocks.push_back(std::move(blk));
    width = size;
    kind = dual(kind);
  }
  net.validate();
  return net;
}

inline Tensor3 as_batch(const Matrix& samples) {
  Tensor3 t(samples.rows, 1, samples.cols);
  std::copy(samples.data.begin(), samples.data.end(), t.data().begin());
  return t;
}

/// Outputs of every layer: element 0 is the input batch, element k + 1 the
/// output of block k.
inline std::vector<Tensor3> forward_layers(const Network& net, const Matrix& samples) {
  if (samples.cols != net.predicates.size())
    throw std::invalid_argument("sample width " + std::to_string(samples.cols) +
                                " does not match predicate count " +
                                std::to_string(net.predicates.size()));
  std::vector<Tensor3> layers;
  layers.reserve(net.blocks.size() + 1);
  layers.push_back(as_batch(samples));
  for (const auto& blk : net.blocks)
    layers.push_back(
        block_forward(blk.shape, blk.kind, blk.weights, blk.betas, blk.connectivity, layers.back()));
  return layers;
}

inline std::vector<TruthValue> predict(const Network& net, const Matrix& samples) {
  if (samples.rows == 0) {
    if (samples.cols != net.predicates.size() && samples.cols != 0)
      throw std::invalid_argument("sample width does not match predicate count");
    return {};
  }
  const auto layers = forward_layers(net, samples);
  const auto& out = layers.back();
  std::vector<TruthValue> scores(out.dim0());
  for (std::size_t b = 0; b < out.dim0(); ++b) scores[b] = out(b, 0, 0);
  return scores;
}

/// Stored weights across all blocks; biases are fixed and not counted.
inline std::size_t parameter_count(const Network& net) {
  std::size_t n = 0;
  for (const auto& blk : net.blocks) n += blk.shape.weight_count();
  return n;
}

}  // namespace nrn
