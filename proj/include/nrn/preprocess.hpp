#pragma once

// Dataset ingestion helpers: scaling, tree-derived binarization, the
// feature/label association prior and the split and fold rules.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nrn/common.hpp"
#include "nrn/network.hpp"

namespace nrn {

struct Dataset {
  std::vector<std::string> feature_names;
  Matrix features;  // n x m, raw units
  std::vector<int> labels;

  std::size_t size() const { return features.rows; }
  std::size_t feature_count() const { return features.cols; }

  Dataset subset(std::span<const std::size_t> idx) const {
    Dataset d;
    d.feature_names = feature_names;
    d.features = features.select_rows(idx);
    d.labels.reserve(idx.size());
    for (auto i : idx) d.labels.push_back(labels[i]);
    return d;
  }

  void validate() const {
    if (features.cols != feature_names.size())
      throw std::invalid_argument("feature name count does not match column count");
    if (labels.size() != features.rows)
      throw std::invalid_argument("label count does not match row count");
    for (int y : labels)
      if (y != 0 && y != 1) throw std::invalid_argument("labels must be 0 or 1");
  }
};

struct ScaledColumn {
  std::vector<double> values;
  MinMaxScaler scaler;
};

inline ScaledColumn minmax_scale(std::span<const double> col) {
  ScaledColumn out{{}, MinMaxScaler::fit(col)};
  out.values.reserve(col.size());
  for (double v : col) out.values.push_back(out.scaler.forward(v));
  return out;
}

// ---------------------------------------------------------------------------
// Feature binarization from trees

struct FbftParams {
  std::size_t tree_num = 11;
  std::size_t tree_depth = 6;
  double feature_fraction = 0.65;
  int thresh_round = 4;
  /// Fit each tree on a bootstrap resample instead of the full data.
  bool bootstrap = true;
};

struct BinarizationPlan {
  /// Per raw feature, strictly increasing thresholds in raw units.
  std::vector<std::vector<double>> thresholds;
  /// Set when the data could not be split at all (single class).
  bool degenerate = false;

  std::size_t predicate_count() const {
    std::size_t n = 0;
    for (const auto& t : thresholds) n += t.size();
    return n;
  }
  friend bool operator==(const BinarizationPlan&, const BinarizationPlan&) = default;
};

namespace detail {

inline double gini(double pos, double total) {
  if (total <= 0.0) return 0.0;
  const double p = pos / total;
  return 2.0 * p * (1.0 - p);
}

inline double round_to(double v, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(v * scale) / scale;
}

class CartBuilder {
 public:
  CartBuilder(const Matrix& x, std::span<const int> y, std::span<const std::size_t> features,
              std::size_t max_depth, std::vector<std::vector<double>>& sink)
      : x_(x), y_(y), features_(features), max_depth_(max_depth), sink_(sink) {}

  void grow(std::vector<std::size_t> rows, std::size_t depth) {
    if (depth >= max_depth_ || rows.size() < 2) return;
    double pos = 0;
    for (auto r : rows) pos += y_[r];
    const double n = static_cast<double>(rows.size());
    const double parent = gini(pos, n);
    if (parent == 0.0) return;

    double best_score = parent * n;
    std::size_t best_feature = 0;
    double best_threshold = 0.0;
    bool found = false;
    std::vector<std::size_t> order = rows;
    for (std::size_t f : features_) {
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return x_(a, f) < x_(b, f) || (x_(a, f) == x_(b, f) && a < b);
      });
      double left_pos = 0;
      for (std::size_t k = 0; k + 1 < order.size(); ++k) {
        left_pos += y_[order[k]];
        const double lo = x_(order[k], f), hi = x_(order[k + 1], f);
        if (lo == hi) continue;
        const double nl = static_cast<double>(k + 1), nr = n - nl;
        const double score = gini(left_pos, nl) * nl + gini(pos - left_pos, nr) * nr;
        if (score < best_score - 1e-12) {
          best_score = score;
          best_feature = f;
          best_threshold = 0.5 * (lo + hi);
          found = true;
        }
      }
    }
    if (!found) return;
    sink_[best_feature].push_back(best_threshold);
    std::vector<std::size_t> left, right;
    for (auto r : rows) (x_(r, best_feature) <= best_threshold ? left : right).push_back(r);
    grow(std::move(left), depth + 1);
    grow(std::move(right), depth + 1);
  }

 private:
  const Matrix& x_;
  std::span<const int> y_;
  std::span<const std::size_t> features_;
  std::size_t max_depth_;
  std::vector<std::vector<double>>& sink_;
};

}  // namespace detail

/// Fits tree_num Gini CART trees on bootstrap resamples, each over a random
/// ceil(feature_fraction * m) feature subset, and keeps every split threshold
/// rounded to thresh_round decimals.
inline BinarizationPlan fbft_fit(const Matrix& x, std::span<const int> labels,
                                 const FbftParams& params, std::uint64_t seed) {
  if (labels.size() != x.rows) throw std::invalid_argument("label count does not match rows");
  if (!(params.feature_fraction > 0.0 && params.feature_fraction <= 1.0))
    throw std::invalid_argument("fbft_feature_selection must lie in (0,1]");
  BinarizationPlan plan;
  plan.thresholds.assign(x.cols, {});
  const auto positives = std::count(labels.begin(), labels.end(), 1);
  if (x.rows == 0 || positives == 0 || static_cast<std::size_t>(positives) == x.rows) {
    plan.degenerate = true;
    return plan;
  }

  std::mt19937_64 rng(seed);
  const auto n_features = std::min<std::size_t>(
      x.cols, static_cast<std::size_t>(std::ceil(params.feature_fraction * x.cols)));
  std::vector<std::vector<double>> raw(x.cols);
  for (std::size_t t = 0; t < params.tree_num; ++t) {
    std::vector<std::size_t> rows(x.rows);
    std::iota(rows.begin(), rows.end(), 0);
    if (params.bootstrap) {
      std::uniform_int_distribution<std::size_t> pick(0, x.rows - 1);
      for (auto& r : rows) r = pick(rng);
    }
    auto feats = detail::sample_without_replacement(x.cols, n_features, rng);
    std::sort(feats.begin(), feats.end());
    detail::CartBuilder(x, labels, feats, params.tree_depth, raw).grow(std::move(rows), 0);
  }
  for (std::size_t f = 0; f < x.cols; ++f) {
    auto& out = plan.thresholds[f];
    for (double t : raw[f]) out.push_back(detail::round_to(t, params.thresh_round));
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
  }
  return plan;
}

enum class BinarizeMode { Replace, None };

inline std::string_view to_string(BinarizeMode m) { return m == BinarizeMode::Replace ? "replace" : "none"; }

inline BinarizeMode parse_binarize_mode(std::string_view s) {
  if (s == "replace") return BinarizeMode::Replace;
  if (s == "none") return BinarizeMode::None;
  throw std::invalid_argument("binarize must be replace or none, got '" + std::string(s) + "'");
}

/// Fitted mapping from raw feature rows to predicate-space rows.
///
/// Features with thresholds become one 1{f <= t} column per threshold;
/// the rest pass through min-max scaled (clamped to [0,1] outside the
/// fitted range).
struct PredicatePipeline {
  std::vector<std::string> feature_names;
  BinarizationPlan plan;
  std::vector<MinMaxScaler> scalers;
  std::vector<Predicate> predicates;

  static PredicatePipeline build(std::vector<std::string> names, BinarizationPlan plan,
                                 std::vector<MinMaxScaler> scalers) {
    if (plan.thresholds.size() != names.size() || scalers.size() != names.size())
      throw std::invalid_argument("binarization plan does not match the feature schema");
    PredicatePipeline p{std::move(names), std::move(plan), std::move(scalers), {}};
    for (std::size_t f = 0; f < p.feature_names.size(); ++f) {
      const auto& th = p.plan.thresholds[f];
      if (th.empty()) {
        p.predicates.push_back({f, p.feature_names[f], std::nullopt, p.scalers[f]});
        continue;
      }
      for (double t : th) {
        ThresholdCondition cond{f, p.feature_names[f], CompareOp::LessEqual, t};
        p.predicates.push_back({f, cond.to_string(), cond, std::nullopt});
      }
    }
    return p;
  }

  static PredicatePipeline fit(const Dataset& data, BinarizeMode mode, const FbftParams& params,
                               std::uint64_t seed) {
    std::vector<MinMaxScaler> scalers;
    for (std::size_t f = 0; f < data.feature_count(); ++f) {
      const auto col = data.features.column(f);
      scalers.push_back(MinMaxScaler::fit(col));
    }
    BinarizationPlan plan;
    if (mode == BinarizeMode::Replace)
      plan = fbft_fit(data.features, data.labels, params, seed);
    else
      plan.thresholds.assign(data.feature_count(), {});
    return build(data.feature_names, std::move(plan), std::move(scalers));
  }

  Matrix transform(const Matrix& raw) const {
    if (raw.cols != feature_names.size())
      throw std::invalid_argument("raw row width " + std::to_string(raw.cols) +
                                  " does not match schema width " +
                                  std::to_string(feature_names.size()));
    Matrix out(raw.rows, predicates.size());
    for (std::size_t r = 0; r < raw.rows; ++r)
      for (std::size_t k = 0; k < predicates.size(); ++k) {
        const auto& p = predicates[k];
        const double v = raw(r, p.feature_index);
        out(r, k) = p.condition ? (p.condition->holds(v) ? 1.0 : 0.0) : clamp01(p.scaler->forward(v));
      }
    return out;
  }
};

/// Binarized plan applied to a matrix, returning only the predicate matrix
/// and list. Scalers are fitted on the same data.
struct TransformResult {
  Matrix values;
  std::vector<Predicate> predicates;
};

inline TransformResult fbft_transform(const BinarizationPlan& plan,
                                      const std::vector<std::string>& names, const Matrix& raw) {
  std::vector<MinMaxScaler> scalers;
  for (std::size_t f = 0; f < raw.cols; ++f) {
    const auto col = raw.column(f);
    scalers.push_back(MinMaxScaler::fit(col));
  }
  auto pipe = PredicatePipeline::build(names, plan, std::move(scalers));
  return {pipe.transform(raw), pipe.predicates};
}

// ---------------------------------------------------------------------------
// Association prior

using AssociationScorer = std::function<double(std::span<const double>, std::span<const int>)>;

/// Mutual information between the decile-binned column and the label,
/// divided by the label entropy so that a column determining the label
/// scores 1. Bins come from ranks, which makes the score invariant to
/// increasing affine maps of the column.
inline double association_score(std::span<const double> col, std::span<const int> labels) {
  if (col.empty() || col.size() != labels.size())
    throw std::invalid_argument("association score needs equal-length nonempty inputs");
  constexpr std::size_t kBins = 10;
  const std::size_t n = col.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return col[a] < col[b]; });

  double counts[kBins][2] = {};
  std::size_t first_rank = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0 && col[order[k]] != col[order[k - 1]]) first_rank = k;
    const std::size_t bin = std::min(kBins - 1, first_rank * kBins / n);
    counts[bin][labels[order[k]] == 1 ? 1 : 0] += 1.0;
  }
  const double total = static_cast<double>(n);
  double py[2] = {0, 0};
  for (auto& c : counts) {
    py[0] += c[0];
    py[1] += c[1];
  }
  double hy = 0.0;
  for (double p : py)
    if (p > 0) hy -= (p / total) * std::log(p / total);
  if (hy <= 0.0) return 0.0;
  double mi = 0.0;
  for (auto& c : counts) {
    const double px = c[0] + c[1];
    for (int y = 0; y < 2; ++y)
      if (c[y] > 0) mi += (c[y] / total) * std::log((c[y] * total) / (px * py[y]));
  }
  return std::clamp(mi / hy, 0.0, 1.0);
}

inline std::vector<double> association_scores(const Matrix& x, std::span<const int> labels,
                                              const AssociationScorer& scorer = association_score) {
  std::vector<double> out(x.cols);
  for (std::size_t c = 0; c < x.cols; ++c) {
    const auto col = x.column(c);
    out[c] = scorer(col, labels);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Splits

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

/// 60% train (capped at 10 000 rows), the rest halved into validation and
/// test (each capped at 50 000).
inline SplitIndices split_dataset(std::size_t n, std::uint64_t seed) {
  if (n < 10) throw std::invalid_argument("need at least 10 rows to split");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const std::size_t n_train_region = n * 6 / 10;
  const std::size_t rest = n - n_train_region;
  const std::size_t n_val = rest / 2;
  SplitIndices s;
  s.train.assign(idx.begin(), idx.begin() + std::min<std::size_t>(n_train_region, 10000));
  s.val.assign(idx.begin() + n_train_region,
               idx.begin() + n_train_region + std::min<std::size_t>(n_val, 50000));
  s.test.assign(idx.begin() + n_train_region + n_val,
                idx.begin() + n_train_region + n_val + std::min<std::size_t>(rest - n_val, 50000));
  return s;
}

inline int cv_folds(std::size_t n_train) {
  if (n_train == 0) throw std::invalid_argument("n_train must be >= 1");
  if (n_train > 6000) return 1;
  if (n_train >= 3000) return 2;
  if (n_train >= 1000) return 3;
  return 5;
}

}  // namespace nrn
