#pragma once

// Model evaluation: AUC, mean explanation size and single-deletion
// agreement between feature importance and the AUC drop under permutation.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "nrn/explain.hpp"
#include "nrn/metrics.hpp"
#include "nrn/model.hpp"

namespace nrn {

/// Mean rule count of simplified sample explanations over k rows drawn
/// without replacement (all rows when k exceeds the row count).
inline double explanation_size(const Model& model, const Matrix& raw, std::size_t k,
                               std::uint64_t seed, const ExplainOptions& opts = {}) {
  if (k == 0) throw std::invalid_argument("explanation_size needs k >= 1");
  if (raw.rows == 0) throw std::invalid_argument("explanation_size needs at least one row");
  std::mt19937_64 rng(seed);
  const auto rows = detail::sample_without_replacement(raw.rows, std::min(k, raw.rows), rng);
  const Matrix x = model.pipeline.transform(raw);
  double total = 0.0;
  for (std::size_t r : rows)
    total += static_cast<double>(explain_and_simplify(model.network, x.row(r), raw.row(r), opts).rules.size());
  return total / static_cast<double>(rows.size());
}

struct SingleDeletion {
  double base_auc = 0.0;
  std::vector<double> delta_auc;  // per raw feature, base - perturbed
  double spearman = 0.0;
  double pearson = 0.0;
};

/// Per-feature AUC drops from a seeded within-column permutation.
inline std::vector<double> deletion_deltas(const Model& model, const Matrix& raw,
                                           std::span<const int> labels, std::uint64_t seed,
                                           double* base_out = nullptr) {
  const double base = roc_auc(model.predict_raw(raw), labels);
  if (base_out) *base_out = base;
  std::vector<double> delta(raw.cols);
  for (std::size_t f = 0; f < raw.cols; ++f) {
    std::mt19937_64 rng(seed + 0x632be59bd9b4e019ULL * (f + 1));
    std::vector<std::size_t> perm(raw.rows);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix shuffled = raw;
    for (std::size_t r = 0; r < raw.rows; ++r) shuffled(r, f) = raw(perm[r], f);
    delta[f] = base - roc_auc(model.predict_raw(shuffled), labels);
  }
  return delta;
}

/// Throws std::domain_error when either vector has zero variance.
inline SingleDeletion single_deletion(const Model& model, std::span<const double> importance,
                                      const Matrix& raw, std::span<const int> labels,
                                      std::uint64_t seed) {
  if (importance.size() != raw.cols)
    throw std::invalid_argument("importance length must equal the raw feature count");
  SingleDeletion sd;
  sd.delta_auc = deletion_deltas(model, raw, labels, seed, &sd.base_auc);
  sd.spearman = spearman(importance, sd.delta_auc);
  sd.pearson = pearson(importance, sd.delta_auc);
  return sd;
}

struct EvalReport {
  double auc = 0.0;
  double explanation_size = 0.0;
  /// NaN when the correlation is undefined (see sd_note).
  double sd_spearman = std::numeric_limits<double>::quiet_NaN();
  double sd_pearson = std::numeric_limits<double>::quiet_NaN();
  std::string sd_note;
  std::vector<std::string> feature_names;
  std::vector<double> importance;
  std::vector<double> delta_auc;
  std::size_t parameter_count = 0;
  std::size_t rows = 0;
  std::size_t explained = 0;
  std::map<std::string, double> timings;  // seconds per phase

  double parameter_count_thousands() const { return static_cast<double>(parameter_count) / 1000.0; }
};

struct EvalOptions {
  std::size_t k = 100;
  std::uint64_t seed = 0;
  ExplainOptions explain;
};

inline EvalReport evaluate_model(const Model& model, const Matrix& raw, std::span<const int> labels,
                                 const EvalOptions& opts = {}) {
  using clock = std::chrono::steady_clock;
  auto seconds = [](clock::time_point a) {
    return std::chrono::duration<double>(clock::now() - a).count();
  };
  EvalReport r;
  r.rows = raw.rows;
  r.feature_names = model.schema();
  r.parameter_count = parameter_count(model.network);

  auto t = clock::now();
  r.auc = roc_auc(model.predict_raw(raw), labels);
  r.timings["auc"] = seconds(t);

  t = clock::now();
  r.explained = std::min(opts.k, raw.rows);
  r.explanation_size = explanation_size(model, raw, opts.k, opts.seed, opts.explain);
  r.timings["explanation_size"] = seconds(t);

  t = clock::now();
  r.importance = feature_importance(model.network);
  r.delta_auc = deletion_deltas(model, raw, labels, opts.seed);
  try {
    r.sd_spearman = spearman(r.importance, r.delta_auc);
    r.sd_pearson = pearson(r.importance, r.delta_auc);
  } catch (const std::exception& e) {
    r.sd_note = e.what();
  }
  r.timings["single_deletion"] = seconds(t);
  return r;
}

inline nlohmann::json to_json(const EvalReport& r) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json j;
  j["auc"] = num(r.auc);
  j["explanation_size"] = num(r.explanation_size);
  j["explained_samples"] = r.explained;
  j["sd_spearman"] = num(r.sd_spearman);
  j["sd_pearson"] = num(r.sd_pearson);
  if (!r.sd_note.empty()) j["sd_note"] = r.sd_note;
  j["parameter_count"] = r.parameter_count;
  j["parameter_count_thousands"] = r.parameter_count_thousands();
  j["rows"] = r.rows;
  j["features"] = nlohmann::json::array();
  for (std::size_t f = 0; f < r.feature_names.size(); ++f)
    j["features"].push_back({{"name", r.feature_names[f]},
                             {"importance", f < r.importance.size() ? num(r.importance[f]) : nullptr},
                             {"delta_auc", f < r.delta_auc.size() ? num(r.delta_auc[f]) : nullptr}});
  j["timings_seconds"] = r.timings;
  return j;
}

inline std::string to_text(const EvalReport& r) {
  auto fmt = [](double v) { return std::isfinite(v) ? format_sig(v, 6) : std::string("undefined"); };
  std::string s;
  s += "auc: " + fmt(r.auc) + "\n";
  s += "explanation_size: " + fmt(r.explanation_size) + " (over " + std::to_string(r.explained) +
       " samples)\n";
  s += "sd_spearman: " + fmt(r.sd_spearman) + "\n";
  s += "sd_pearson: " + fmt(r.sd_pearson) + "\n";
  if (!r.sd_note.empty()) s += "sd_note: " + r.sd_note + "\n";
  s += "parameters: " + format_sig(r.parameter_count_thousands(), 6) + "K (" +
       std::to_string(r.parameter_count) + ")\n";
  s += "feature importance / delta auc:\n";
  for (std::size_t f = 0; f < r.feature_names.size(); ++f)
    s += "  " + r.feature_names[f] + ": " + fmt(r.importance[f]) + " / " + fmt(r.delta_auc[f]) + "\n";
  for (const auto& [phase, sec] : r.timings) s += "time " + phase + ": " + format_sig(sec, 4) + "s\n";
  return s;
}

}  // namespace nrn
