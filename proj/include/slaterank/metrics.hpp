#pragma once

// Ranking and diversity metrics: nDCG, ILAD, ILMD, regret curves.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "slaterank/errors.hpp"
#include "slaterank/numerics.hpp"
#include "slaterank/round_log.hpp"

namespace slaterank {

inline constexpr std::size_t kAllPositions = std::numeric_limits<std::size_t>::max();

/// Σ (2^rel_i − 1) / log₂(i + 1) over the first `window` positions (i from 1).
inline double dcg(std::span<const double> rel, std::size_t window = kAllPositions) {
  const std::size_t n = std::min(window, rel.size());
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    s += (std::exp2(rel[i]) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
  return s;
}

/// DCG over the ideal (relevance-sorted) order of the same list. Empty when
/// no grade is positive.
inline std::optional<double> ndcg(std::span<const double> rel,
                                  std::size_t window = kAllPositions) {
  for (double r : rel)
    if (!(r >= 0.0)) throw OutOfRange("ndcg: relevance grades must be >= 0");
  std::vector<double> ideal(rel.begin(), rel.end());
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  const double idcg = dcg(ideal, window);
  if (idcg <= 0.0) return std::nullopt;
  return std::min(1.0, dcg(rel, window) / idcg);
}

/// Mean and minimum of 1 − S_ij over ordered distinct pairs of one list.
struct ListDistance {
  double mean = 0.0;
  double min = 0.0;
};

/// Empty for lists with fewer than two items.
template <typename Similarity>
std::optional<ListDistance> list_distance(std::size_t n, Similarity&& sim) {
  if (n < 2) return std::nullopt;
  double sum = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      // S is symmetric, so each unordered pair stands for both orderings.
      const double d = 1.0 - sim(i, j);
      sum += d;
      lo = std::min(lo, d);
    }
  }
  return ListDistance{sum / static_cast<double>(n * (n - 1) / 2), lo};
}

inline std::optional<ListDistance> list_distance(std::span<const std::size_t> items,
                                                 const Matrix& s) {
  for (std::size_t i : items)
    if (i >= s.rows()) throw DimensionMismatch("list_distance: item outside similarity matrix");
  return list_distance(items.size(),
                       [&](std::size_t a, std::size_t b) { return s(items[a], items[b]); });
}

struct DiversityScore {
  double value = 0.0;
  std::size_t lists_used = 0;
  std::size_t lists_excluded = 0;  // fewer than two items
};

namespace detail {

template <typename Pick>
DiversityScore mean_over_customers(const std::vector<std::vector<std::size_t>>& lists,
                                   const Matrix& s, Pick&& pick) {
  DiversityScore out;
  double sum = 0.0;
  for (const auto& list : lists) {
    const auto d = list_distance(list, s);
    if (!d) {
      ++out.lists_excluded;
      continue;
    }
    sum += pick(*d);
    ++out.lists_used;
  }
  if (out.lists_used == 0) throw NoEligibleLists("no recommendation list has two or more items");
  out.value = sum / static_cast<double>(out.lists_used);
  return out;
}

}  // namespace detail

/// mean over customers of mean pairwise (1 − S_ij).
inline DiversityScore ilad(const std::vector<std::vector<std::size_t>>& lists, const Matrix& s) {
  return detail::mean_over_customers(lists, s, [](const ListDistance& d) { return d.mean; });
}

/// mean over customers of min pairwise (1 − S_ij).
inline DiversityScore ilmd(const std::vector<std::vector<std::size_t>>& lists, const Matrix& s) {
  return detail::mean_over_customers(lists, s, [](const ListDistance& d) { return d.min; });
}

/// Best achievable expected clicks within the impressed depth minus the
/// expected clicks the served slate got there.
inline double round_regret(const RoundLog& log) {
  if (log.true_p.size() != log.slate.size() || (log.true_p.empty() && !log.slate.empty()))
    throw MissingTruth("round " + std::to_string(log.t) + " carries no true click probabilities");
  std::vector<double> sorted = log.true_p;
  const std::size_t depth = std::min(log.impressed, sorted.size());
  std::partial_sort(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(depth),
                    sorted.end(), std::greater<>());
  double best = 0.0;
  double got = 0.0;
  for (std::size_t i = 0; i < depth; ++i) {
    best += sorted[i];
    got += log.true_p[i];
  }
  return std::max(0.0, best - got);
}

/// Cumulative regret after each round.
inline std::vector<double> regret_curve(std::span<const RoundLog> logs) {
  std::vector<double> curve;
  curve.reserve(logs.size());
  double total = 0.0;
  for (const auto& log : logs) {
    total += round_regret(log);
    curve.push_back(total);
  }
  return curve;
}

inline double mean(std::span<const double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// Standard error of the mean (two-pass); 0 for fewer than two values.
inline double standard_error(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

}  // namespace slaterank
