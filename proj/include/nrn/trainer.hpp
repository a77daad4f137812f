#pragma once

// Gradient descent on network weights interleaved with a Bayesian-UCB
// bandit over predicate columns that drives pruning and regrowth of the
// first layer.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nrn/common.hpp"
#include "nrn/logic.hpp"
#include "nrn/metrics.hpp"
#include "nrn/network.hpp"
#include "nrn/preprocess.hpp"

namespace nrn {

// ---------------------------------------------------------------------------
// Loss and gradients

inline constexpr double kProbClip = 1e-7;

inline double bce_loss(std::span<const double> yhat, std::span<const int> y) {
  if (yhat.size() != y.size()) throw std::invalid_argument("bce_loss: length mismatch");
  if (yhat.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double p = std::clamp(yhat[i], kProbClip, 1.0 - kProbClip);
    sum += y[i] == 1 ? -std::log(p) : -std::log(1.0 - p);
  }
  return sum / static_cast<double>(y.size());
}

/// One gradient tensor per block, shaped like the block's weights.
using NetworkGradient = std::vector<Tensor3>;

struct LossAndGradient {
  double loss = 0.0;
  NetworkGradient grad;
};

/// Mean BCE over the batch (plus l1_lambda * sum |w|) and its gradient.
/// The derivative of the loss is taken at the clipped prediction.
inline LossAndGradient loss_and_gradient(const Network& net, const Matrix& x,
                                         std::span<const int> y, double l1_lambda = 0.0) {
  if (x.rows != y.size()) throw std::invalid_argument("batch rows and labels differ");
  if (x.rows == 0) throw std::invalid_argument("empty batch");
  const auto layers = forward_layers(net, x);
  const auto& out = layers.back();
  const std::size_t n = x.rows;

  std::vector<double> yhat(n);
  for (std::size_t b = 0; b < n; ++b) yhat[b] = out(b, 0, 0);
  LossAndGradient res;
  res.loss = bce_loss(yhat, y);

  Tensor3 upstream(n, 1, 1);
  for (std::size_t b = 0; b < n; ++b) {
    const double p = std::clamp(yhat[b], kProbClip, 1.0 - kProbClip);
    upstream(b, 0, 0) = (p - y[b]) / (p * (1.0 - p)) / static_cast<double>(n);
  }

  res.grad.resize(net.blocks.size());
  for (std::size_t k = net.blocks.size(); k-- > 0;) {
    const auto& blk = net.blocks[k];
    const auto& input = layers[k];
    auto& g = res.grad[k];
    g = Tensor3(blk.shape.channels, blk.shape.out_size, blk.shape.in_size);
    Tensor3 down(input.dim0(), input.dim1(), k > 0 ? input.dim2() : 0);
    std::vector<double> gathered(blk.shape.in_size), d_in(blk.shape.in_size);
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = 0; c < blk.shape.channels; ++c)
        for (std::size_t o = 0; o < blk.shape.out_size; ++o) {
          const double u = upstream(b, c, o);
          if (u == 0.0) continue;
          const auto conn = blk.inputs_of(c, o);
          for (std::size_t i = 0; i < conn.size(); ++i) gathered[i] = input(b, c, conn[i]);
          std::fill(d_in.begin(), d_in.end(), 0.0);
          accumulate_node_gradients(blk.kind, blk.weights.row(c, o),
                                    blk.betas[c * blk.shape.out_size + o], gathered, u, d_in,
                                    g.row(c, o));
          if (k > 0)
            for (std::size_t i = 0; i < conn.size(); ++i) down(b, c, conn[i]) += d_in[i];
        }
    upstream = std::move(down);
  }

  if (l1_lambda > 0.0) {
    for (std::size_t k = 0; k < net.blocks.size(); ++k) {
      const auto& w = net.blocks[k].weights.data();
      auto& g = res.grad[k].data();
      for (std::size_t i = 0; i < w.size(); ++i) {
        res.loss += l1_lambda * std::abs(w[i]);
        g[i] += l1_lambda * weight_sign(w[i]);
      }
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Optimizer and schedule

/// Learning-rate multiplier for cosine annealing with warm restarts at a
/// (fractional) epoch position.
inline double cosine_warm_restart_factor(double epoch, double t_0, double t_mult) {
  if (!(t_0 > 0)) throw std::invalid_argument("t_0 must be > 0");
  double t_i = t_0, t_cur = epoch;
  if (t_mult == 1.0) {
    t_cur = std::fmod(epoch, t_0);
  } else {
    while (t_cur >= t_i) {
      t_cur -= t_i;
      t_i *= t_mult;
    }
  }
  return 0.5 * (1.0 + std::cos(std::numbers::pi * t_cur / t_i));
}

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled
};

class AdamOptimizer {
 public:
  AdamOptimizer() = default;
  AdamOptimizer(const Network& net, AdamOptions opts) : opts_(opts) { reset_all(net); }

  void reset_all(const Network& net) {
    m_.clear();
    v_.clear();
    for (const auto& blk : net.blocks) {
      m_.emplace_back(blk.weights.dim0(), blk.weights.dim1(), blk.weights.dim2());
      v_.emplace_back(blk.weights.dim0(), blk.weights.dim1(), blk.weights.dim2());
    }
    step_ = 0;
  }

  /// Clears the moment estimates of one flattened weight slot of a block.
  void reset_slot(std::size_t block, std::size_t flat_index) {
    m_[block].data()[flat_index] = 0.0;
    v_[block].data()[flat_index] = 0.0;
  }

  void step(Network& net, const NetworkGradient& grad, double lr) {
    ++step_;
    const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(step_));
    for (std::size_t k = 0; k < net.blocks.size(); ++k) {
      auto& w = net.blocks[k].weights.data();
      const auto& g = grad[k].data();
      auto& m = m_[k].data();
      auto& v = v_[k].data();
      for (std::size_t i = 0; i < w.size(); ++i) {
        if (opts_.weight_decay > 0.0) w[i] -= lr * opts_.weight_decay * w[i];
        m[i] = opts_.beta1 * m[i] + (1.0 - opts_.beta1) * g[i];
        v[i] = opts_.beta2 * v[i] + (1.0 - opts_.beta2) * g[i] * g[i];
        w[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + opts_.eps);
      }
    }
  }

  std::size_t steps() const { return step_; }

 private:
  AdamOptions opts_;
  std::vector<Tensor3> m_, v_;
  std::size_t step_ = 0;
};

/// Single Adam step on one batch; returns the pre-update loss.
inline double gradient_step(Network& net, AdamOptimizer& opt, const Matrix& x,
                            std::span<const int> y, double lr, double l1_lambda = 0.0) {
  auto lg = loss_and_gradient(net, x, y, l1_lambda);
  if (!std::isfinite(lg.loss))
    throw std::runtime_error("non-finite training loss (" + format_exact(lg.loss) + ") on a batch of " +
                             std::to_string(x.rows) + " rows");
  opt.step(net, lg.grad, lr);
  return lg.loss;
}

// ---------------------------------------------------------------------------
// Bandit

struct BanditArm {
  double prior_mean = 0.0;
  double reward_sum = 0.0;
  double reward_sq_sum = 0.0;
  std::size_t pull_count = 0;

  friend bool operator==(const BanditArm&, const BanditArm&) = default;
};

/// Known-variance normal arms seeded with one pseudo-observation at the
/// association prior.
struct BanditPolicy {
  std::vector<BanditArm> arms;
  double ucb_scale = 1.5;

  static BanditPolicy from_priors(std::span<const double> priors, double ucb_scale) {
    BanditPolicy p;
    p.ucb_scale = ucb_scale;
    for (double m : priors) p.arms.push_back({m, 0.0, 0.0, 0});
    return p;
  }

  double posterior_mean(std::size_t i) const {
    const auto& a = arms[i];
    return (a.prior_mean + a.reward_sum) / (1.0 + static_cast<double>(a.pull_count));
  }

  double posterior_std(std::size_t i) const {
    const auto& a = arms[i];
    const double n = 1.0 + static_cast<double>(a.pull_count);
    if (n < 2.0) return a.prior_mean / 2.0;
    const double sum = a.prior_mean + a.reward_sum;
    const double sq = a.prior_mean * a.prior_mean + a.reward_sq_sum;
    return std::sqrt(std::max(0.0, (sq - sum * sum / n) / (n - 1.0)));
  }

  friend bool operator==(const BanditPolicy&, const BanditPolicy&) = default;
};

inline BanditPolicy bmab_update(BanditPolicy policy, std::span<const double> rewards) {
  if (rewards.size() != policy.arms.size())
    throw std::invalid_argument("reward vector length does not match arm count");
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    if (!(rewards[i] > 0.0)) continue;
    auto& a = policy.arms[i];
    a.pull_count += 1;
    a.reward_sum += rewards[i];
    a.reward_sq_sum += rewards[i] * rewards[i];
  }
  return policy;
}

inline std::vector<double> bmab_scores(const BanditPolicy& policy) {
  std::vector<double> s(policy.arms.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double bonus = policy.ucb_scale * policy.posterior_std(i) /
                         std::sqrt(1.0 + static_cast<double>(policy.arms[i].pull_count));
    s[i] = std::max(0.0, policy.posterior_mean(i) + bonus);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Rewards

enum class PruneStrategy { Class, Logic, LogicClass };

inline std::string_view to_string(PruneStrategy s) {
  switch (s) {
    case PruneStrategy::Class: return "class";
    case PruneStrategy::Logic: return "logic";
    case PruneStrategy::LogicClass: return "logic_class";
  }
  return "?";
}

inline PruneStrategy parse_prune_strategy(std::string_view s) {
  if (s == "class") return PruneStrategy::Class;
  if (s == "logic") return PruneStrategy::Logic;
  if (s == "logic_class") return PruneStrategy::LogicClass;
  throw std::invalid_argument("prune_strategy must be class, logic or logic_class, got '" +
                              std::string(s) + "'");
}

namespace detail {
inline std::vector<double> abs_values(std::span<const double> v) {
  std::vector<double> out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [](double x) { return std::abs(x); });
  return out;
}
}  // namespace detail

/// Every first-layer weight strictly above the rho-percentile of |weights|
/// adds its magnitude to the arm of the predicate it reads.
inline std::vector<double> reward_class(const Network& net, double rho) {
  std::vector<double> r(net.predicates.size(), 0.0);
  const auto& blk = net.blocks.front();
  const auto mags = detail::abs_values(blk.weights.data());
  const double cut = percentile(mags, rho);
  for (std::size_t k = 0; k < mags.size(); ++k)
    if (mags[k] > cut) r[blk.connectivity[k]] += mags[k];
  return r;
}

inline constexpr std::size_t kLogicRewardRowCap = 10000;

/// Scores each first-layer node by the AUC of its output against the labels;
/// nodes strictly above the rho-percentile reward every predicate they read.
/// Only the first kLogicRewardRowCap rows are scored.
inline std::vector<double> reward_logic(const Network& net, double rho, const Matrix& x,
                                        std::span<const int> labels) {
  if (x.rows != labels.size()) throw std::invalid_argument("reward_logic: rows and labels differ");
  const auto& blk = net.blocks.front();
  const std::size_t rows = std::min(x.rows, kLogicRewardRowCap);
  std::vector<std::size_t> head(rows);
  std::iota(head.begin(), head.end(), 0);
  const auto out = block_forward(blk.shape, blk.kind, blk.weights, blk.betas, blk.connectivity,
                                 as_batch(rows == x.rows ? x : x.select_rows(head)));
  const std::size_t nodes = blk.shape.channels * blk.shape.out_size;
  std::vector<double> auc(nodes);
  std::vector<double> col(rows);
  for (std::size_t c = 0; c < blk.shape.channels; ++c)
    for (std::size_t o = 0; o < blk.shape.out_size; ++o) {
      for (std::size_t b = 0; b < rows; ++b) col[b] = out(b, c, o);
      auc[c * blk.shape.out_size + o] = roc_auc(col, labels.first(rows));
    }
  const double cut = percentile(auc, rho);
  std::vector<double> r(net.predicates.size(), 0.0);
  for (std::size_t node = 0; node < nodes; ++node) {
    if (!(auc[node] > cut)) continue;
    for (std::size_t p : blk.inputs_of(node / blk.shape.out_size, node % blk.shape.out_size))
      r[p] += auc[node];
  }
  return r;
}

/// Second-layer weights strictly above the rho-percentile reward every
/// predicate feeding the first-layer node they read.
inline std::vector<double> reward_logic_class(const Network& net, double rho) {
  if (net.blocks.size() < 2)
    throw std::invalid_argument("logic_class reward needs at least two layers");
  const auto& first = net.blocks[0];
  const auto& second = net.blocks[1];
  const auto mags = detail::abs_values(second.weights.data());
  const double cut = percentile(mags, rho);
  std::vector<double> r(net.predicates.size(), 0.0);
  for (std::size_t k = 0; k < mags.size(); ++k) {
    if (!(mags[k] > cut)) continue;
    const std::size_t node = second.connectivity[k];
    for (std::size_t p : first.inputs_of(0, node)) r[p] += mags[k];
  }
  return r;
}

// ---------------------------------------------------------------------------
// Pruning and regrowth

struct PruneResult {
  std::vector<std::size_t> pruned_slots;  // flattened first-layer indices
  std::vector<std::size_t> kept_predicates;
};

/// Keeps first-layer slots whose |w| is strictly above the rho-percentile,
/// divides the sampling score of every kept predicate by delta once, and
/// rebinds each pruned slot to a predicate drawn proportionally to the
/// adjusted scores. A slot landing on a kept predicate gets a weight whose
/// sign opposes the sum of that predicate's kept weights; other slots draw a
/// fresh magnitude in [low, high) with a random sign when negations are on.
inline PruneResult prune_and_sample(Network& net, const BanditPolicy& policy, double rho,
                                    double delta, double low, double high, bool random_sign,
                                    std::mt19937_64& rng) {
  if (policy.arms.empty()) throw std::invalid_argument("bandit policy has no arms");
  if (policy.arms.size() != net.predicates.size())
    throw std::invalid_argument("bandit arm count does not match predicate count");
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be > 0");
  if (!(low < high)) throw std::invalid_argument("re-initialisation bounds need low < high");

  auto& blk = net.blocks.front();
  auto& w = blk.weights.data();
  auto& conn = blk.connectivity;
  const auto mags = detail::abs_values(w);
  const double cut = percentile(mags, rho);

  auto scores = bmab_scores(policy);
  std::vector<char> kept_pred(net.predicates.size(), 0);
  std::vector<double> kept_sum(net.predicates.size(), 0.0);
  PruneResult res;
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (mags[k] > cut) {
      if (!kept_pred[conn[k]]) scores[conn[k]] /= delta;
      kept_pred[conn[k]] = 1;
      kept_sum[conn[k]] += w[k];
    } else {
      res.pruned_slots.push_back(k);
    }
  }
  for (std::size_t p = 0; p < kept_pred.size(); ++p)
    if (kept_pred[p]) res.kept_predicates.push_back(p);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> magnitude(low, high);
  const std::size_t fan_in = blk.shape.in_size;
  std::vector<double> probs(scores.size());
  for (std::size_t k : res.pruned_slots) {
    const std::size_t node_base = k - k % fan_in;
    std::fill(probs.begin(), probs.end(), 1.0);
    for (std::size_t s = node_base; s < node_base + fan_in; ++s)
      if (s != k) probs[conn[s]] = 0.0;
    double total = 0.0;
    for (std::size_t p = 0; p < probs.size(); ++p) {
      if (probs[p] > 0.0) probs[p] = scores[p];
      total += probs[p];
    }
    if (!(total > 0.0)) {
      // every admissible score is zero: fall back to uniform over admissible predicates
      total = 0.0;
      for (std::size_t p = 0; p < probs.size(); ++p) {
        bool used = false;
        for (std::size_t s = node_base; s < node_base + fan_in; ++s) used |= (s != k && conn[s] == p);
        probs[p] = used ? 0.0 : 1.0;
        total += probs[p];
      }
    }
    const double u = unit(rng) * total;
    double acc = 0.0;
    std::size_t chosen = probs.size();
    for (std::size_t p = 0; p < probs.size(); ++p) {
      if (probs[p] <= 0.0) continue;
      acc += probs[p];
      chosen = p;
      if (u < acc) break;
    }
    conn[k] = chosen;
    const double m = magnitude(rng);
    if (kept_pred[chosen]) {
      w[k] = kept_sum[chosen] < 0.0 ? m : -m;
    } else {
      const bool neg = random_sign && std::bernoulli_distribution(0.5)(rng);
      w[k] = neg ? -m : m;
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Plateau schedule

/// Epoch-level bookkeeping for when to reward the bandit and when to prune.
struct PlateauSchedule {
  enum class Event { Improved, Plateau, Prune, KappaGrown };

  double l_min = std::numeric_limits<double>::infinity();
  std::size_t pc = 0;
  double kappa = 4;
  double tau = 15;
  double iota = 5;

  Event observe(double loss) {
    if (loss < l_min) {
      l_min = loss;
      pc = 0;
      return Event::Improved;
    }
    pc += 1;
    if (static_cast<double>(pc) > kappa) {
      pc = 0;
      return Event::Prune;
    }
    if (static_cast<double>(pc) > tau) {
      kappa += iota;
      return Event::KappaGrown;
    }
    return Event::Plateau;
  }
};

// ---------------------------------------------------------------------------
// Training loop

struct TrainConfig {
  std::size_t epochs = 200;
  double learning_rate = 0.01;
  std::size_t batch_size = 32;
  double prune_quantile = 0.5;
  double delta = 4.0;
  double kappa = 4;
  double tau = 15;
  double iota = 5;
  double ucb_scale = 1.5;
  PruneStrategy prune_strategy = PruneStrategy::Class;
  double reinit_low = 0.002;
  double reinit_high = 0.2;
  bool add_negations = true;
  bool use_l1 = false;
  double l1_lambda = 1e-4;
  bool use_weight_decay = false;
  double weight_decay_alpha = 1e-4;
  double t_0 = 5;
  double t_mult = 2;
  std::size_t early_stopping_plateau_count = 30;
  std::uint64_t seed = 0;
  /// Off: plain gradient descent, no rewards and no pruning.
  bool structure_search = true;

  void validate() const {
    if (epochs == 0) throw std::invalid_argument("epochs must be > 0");
    if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning_rate must be >= 0");
    if (batch_size == 0) throw std::invalid_argument("batch_size must be > 0");
    if (!(prune_quantile >= 0.0 && prune_quantile <= 1.0))
      throw std::invalid_argument("perform_prune_quantile must lie in [0,1]");
    if (!(delta > 0.0)) throw std::invalid_argument("delta must be > 0");
    if (kappa < 0 || tau < 0 || iota < 0)
      throw std::invalid_argument("kappa, tau and iota must be >= 0");
    if (!(reinit_low < reinit_high)) throw std::invalid_argument("re-init bounds need a < b");
  }
};

struct TrainData {
  Matrix x_train;
  std::vector<int> y_train;
  Matrix x_val;
  std::vector<int> y_val;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_auc = 0.0;
  std::size_t pc = 0;
  double kappa = 0.0;
  bool pruned = false;
};

struct TrainHooks {
  /// Replaces the epoch loss seen by the plateau schedule.
  std::function<double(std::size_t epoch, double loss)> loss_override;
  std::function<void(std::size_t epoch, const Network& before, const Network& after)> on_prune;
};

struct TrainResult {
  Network network;  // best-validation snapshot
  Network final_network;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_auc = std::numeric_limits<double>::quiet_NaN();
  BanditPolicy policy;
  std::size_t prune_count = 0;
};

namespace detail {
inline bool has_both_classes(std::span<const int> y) {
  bool pos = false, neg = false;
  for (int v : y) (v == 1 ? pos : neg) = true;
  return pos && neg;
}
}  // namespace detail

inline std::vector<double> structure_reward(const Network& net, const TrainConfig& cfg,
                                            const TrainData& data) {
  switch (cfg.prune_strategy) {
    case PruneStrategy::Class: return reward_class(net, cfg.prune_quantile);
    case PruneStrategy::Logic: return reward_logic(net, cfg.prune_quantile, data.x_train, data.y_train);
    case PruneStrategy::LogicClass: return reward_logic_class(net, cfg.prune_quantile);
  }
  return {};
}

inline TrainResult train(Network net, const TrainData& data, const TrainConfig& cfg,
                         const TrainHooks& hooks = {}) {
  cfg.validate();
  net.validate();
  if (data.x_train.rows == 0) throw std::invalid_argument("training split is empty");
  if (data.x_train.rows != data.y_train.size() || data.x_val.rows != data.y_val.size())
    throw std::invalid_argument("feature rows and labels differ in count");
  if (!detail::has_both_classes(data.y_train))
    throw std::invalid_argument("training labels must contain both classes");
  if (cfg.prune_strategy == PruneStrategy::LogicClass && net.blocks.size() < 2)
    throw std::invalid_argument("logic_class prune strategy needs at least two layers");
  const bool val_usable = detail::has_both_classes(data.y_val);

  std::mt19937_64 batch_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::mt19937_64 structure_rng(cfg.seed ^ 0xc2b2ae3d27d4eb4fULL);

  AdamOptimizer opt(net, {0.9, 0.999, 1e-8, cfg.use_weight_decay ? cfg.weight_decay_alpha : 0.0});
  const double l1 = cfg.use_l1 ? cfg.l1_lambda : 0.0;

  TrainResult res;
  res.policy = BanditPolicy::from_priors(association_scores(data.x_train, data.y_train), cfg.ucb_scale);
  PlateauSchedule sched{std::numeric_limits<double>::infinity(), 0, cfg.kappa, cfg.tau, cfg.iota};

  const std::size_t n = data.x_train.rows;
  const std::size_t n_batches = (n + cfg.batch_size - 1) / cfg.batch_size;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  double best_metric = -std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  res.network = net;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), batch_rng);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < n_batches; ++b) {
      const std::size_t lo = b * cfg.batch_size, hi = std::min(n, lo + cfg.batch_size);
      std::span<const std::size_t> idx(order.data() + lo, hi - lo);
      const Matrix xb = data.x_train.select_rows(idx);
      std::vector<int> yb(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) yb[i] = data.y_train[idx[i]];
      const double pos = static_cast<double>(epoch) + static_cast<double>(b) / static_cast<double>(n_batches);
      const double lr = cfg.learning_rate * cosine_warm_restart_factor(pos, cfg.t_0, cfg.t_mult);
      loss_sum += gradient_step(net, opt, xb, yb, lr, l1) * static_cast<double>(idx.size());
    }
    double loss = loss_sum / static_cast<double>(n);
    if (hooks.loss_override) loss = hooks.loss_override(epoch, loss);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss;
    const auto event = sched.observe(loss);
    if (cfg.structure_search) {
      if (event == PlateauSchedule::Event::Improved) {
        res.policy = bmab_update(std::move(res.policy), structure_reward(net, cfg, data));
      } else if (event == PlateauSchedule::Event::Prune) {
        const Network before = hooks.on_prune ? net : Network{};
        const auto pr = prune_and_sample(net, res.policy, cfg.prune_quantile, cfg.delta, cfg.reinit_low,
                                         cfg.reinit_high, cfg.add_negations, structure_rng);
        for (std::size_t k : pr.pruned_slots) opt.reset_slot(0, k);
        rec.pruned = true;
        ++res.prune_count;
        if (hooks.on_prune) hooks.on_prune(epoch, before, net);
      }
    }
    rec.pc = sched.pc;
    rec.kappa = sched.kappa;

    double metric;
    if (val_usable) {
      rec.val_auc = roc_auc(predict(net, data.x_val), data.y_val);
      metric = rec.val_auc;
    } else {
      rec.val_auc = std::numeric_limits<double>::quiet_NaN();
      metric = -loss;
    }
    res.history.push_back(rec);
    if (metric > best_metric) {
      best_metric = metric;
      res.network = net;
      res.best_epoch = epoch;
      res.best_val_auc = rec.val_auc;
      since_best = 0;
    } else if (++since_best >= cfg.early_stopping_plateau_count) {
      break;
    }
  }
  res.final_network = std::move(net);
  return res;
}

}  // namespace nrn
