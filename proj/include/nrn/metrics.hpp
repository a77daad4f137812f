#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace nrn {

/// Average ranks (1-based), ties sharing the mean of their positions.
inline std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && v[order[j]] == v[order[i]]) ++j;
    // positions i..j-1 (0-based) -> mean rank (i + 1 + j) / 2
    const double r = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
    i = j;
  }
  return ranks;
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half (Mann-Whitney U / (n1 n0)). With a single channel the
/// micro average is the plain binary AUC.
inline double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("roc_auc: scores and labels differ in length");
  std::size_t n1 = 0;
  for (int y : labels) n1 += (y == 1);
  const std::size_t n0 = labels.size() - n1;
  if (n1 == 0 || n0 == 0) throw std::invalid_argument("roc_auc: both classes must be present");
  const auto ranks = average_ranks(scores);
  // Each rank is a multiple of 0.5, so these sums are exact in double.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == 1) rank_sum += ranks[i];
  const double n1d = static_cast<double>(n1);
  const double u = rank_sum - n1d * (n1d + 1.0) / 2.0;
  return u / (n1d * static_cast<double>(n0));
}

inline double micro_roc_auc(std::span<const double> scores, std::span<const int> labels) {
  return roc_auc(scores, labels);
}

inline double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2)
    throw std::invalid_argument("correlation needs two equal-length vectors of length >= 2");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0)
    throw std::domain_error("correlation undefined: a vector has zero variance");
  return sab / std::sqrt(saa * sbb);
}

inline double spearman(std::span<const double> a, std::span<const double> b) {
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  return pearson(ra, rb);
}

}  // namespace nrn
