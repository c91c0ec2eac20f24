#pragma once

// Determinantal point process re-ranking: quality-weighted cosine kernel and
// greedy MAP inference with incremental Cholesky updates.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "slaterank/errors.hpp"
#include "slaterank/numerics.hpp"
#include "slaterank/random.hpp"

namespace slaterank {

struct KernelMatrix {
  Matrix L;
  double theta = 0.0;
};

struct DppSelection {
  std::vector<std::size_t> order;  // candidate indices in selection order
  std::vector<double> gains;       // log d_j² at each pick
};

/// Greedy stops once the best remaining d² falls to this floor.
inline constexpr double kDppFloor = 1e-10;

/// S_ij = (1 + cos(x_i, x_j)) / 2. A zero vector is replaced by the unit
/// basis vector selected by a hash of its id.
inline Matrix similarity_from_features(std::span<const Vec> features,
                                       std::span<const std::string> ids) {
  if (ids.size() != features.size())
    throw DimensionMismatch("similarity_from_features: ids and features differ in length");
  const std::size_t n = features.size();
  if (n == 0) return Matrix();
  const std::size_t dim = features.front().size();
  if (dim == 0) throw DimensionMismatch("similarity_from_features: empty feature vectors");

  std::vector<Vec> unit(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (features[i].size() != dim)
      throw DimensionMismatch("similarity_from_features: feature length differs for " + ids[i]);
    const double len = norm(features[i]);
    if (len > 0.0) {
      unit[i] = features[i];
      for (double& v : unit[i]) v /= len;
    } else {
      unit[i].assign(dim, 0.0);
      unit[i][stable_hash(ids[i]) % dim] = 1.0;
    }
  }

  Matrix s(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    s(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = std::clamp(0.5 * (1.0 + dot(unit[i], unit[j])), 0.0, 1.0);
      s(i, j) = v;
      s(j, i) = v;
    }
  }
  return s;
}

/// L_ij = g_i S_ij g_j with g_i = exp(θ/(2(1−θ)) · r̃_i), r̃ the relevance
/// min–max scaled to [0, 1] over the candidates (all zero when constant).
inline KernelMatrix build_kernel(std::span<const double> relevance, const Matrix& similarity,
                                 double theta) {
  if (!(theta >= 0.0 && theta < 1.0))
    throw ThetaOutOfRange("build_kernel: theta must be in [0, 1), got " + std::to_string(theta));
  const std::size_t n = relevance.size();
  if (!similarity.square() || similarity.rows() != n)
    throw DimensionMismatch("build_kernel: similarity does not match relevance length");
  if (!all_finite(relevance)) throw OutOfRange("build_kernel: non-finite relevance");

  Vec g(n, 1.0);
  if (n > 0) {
    const auto [lo, hi] = std::minmax_element(relevance.begin(), relevance.end());
    const double range = *hi - *lo;
    const double scale = theta / (2.0 * (1.0 - theta));
    if (range > 0.0 && scale > 0.0)
      for (std::size_t i = 0; i < n; ++i) g[i] = std::exp(scale * (relevance[i] - *lo) / range);
  }

  KernelMatrix k{Matrix(n, n), theta};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) k.L(i, j) = g[i] * similarity(i, j) * g[j];
  return k;
}

/// Greedy MAP inference. `on_step(selected, d2)` is invoked after every
/// pick with the residual variances of all items.
template <typename StepObserver>
DppSelection greedy_map(const Matrix& L, std::size_t stop_size, StepObserver&& on_step) {
  if (!L.square()) throw DimensionMismatch("greedy_map: kernel is not square");
  const std::size_t n = L.rows();
  if (n == 0) throw EmptyKernel("greedy_map: empty kernel");
  if (stop_size == 0) throw OutOfRange("greedy_map: stop size must be >= 1");
  const std::size_t limit = std::min(stop_size, n);

  Vec d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = L(i, i);
  // Row i holds c_i, the coordinates of item i against the selected set.
  Matrix c(n, limit);
  std::vector<bool> taken(n, false);

  DppSelection sel;
  auto pick = [&]() -> std::ptrdiff_t {
    std::ptrdiff_t best = -1;
    for (std::size_t i = 0; i < n; ++i)
      if (!taken[i] && (best < 0 || d2[i] > d2[static_cast<std::size_t>(best)]))
        best = static_cast<std::ptrdiff_t>(i);
    return best;
  };

  std::ptrdiff_t next = pick();
  while (next >= 0 && sel.order.size() < limit) {
    const auto j = static_cast<std::size_t>(next);
    if (!(d2[j] > kDppFloor)) break;
    const std::size_t step = sel.order.size();
    taken[j] = true;
    sel.order.push_back(j);
    sel.gains.push_back(std::log(d2[j]));
    const double dj = std::sqrt(d2[j]);
    const auto cj = c.row(j);
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      auto ci = c.row(i);
      double proj = 0.0;
      for (std::size_t s = 0; s < step; ++s) proj += cj[s] * ci[s];
      const double e = (L(j, i) - proj) / dj;
      ci[step] = e;
      d2[i] -= e * e;
    }
    on_step(std::as_const(sel.order), std::span<const double>(d2));
    if (sel.order.size() == limit) break;
    next = pick();
  }
  return sel;
}

inline DppSelection greedy_map(const Matrix& L, std::size_t stop_size) {
  return greedy_map(L, stop_size, [](const std::vector<std::size_t>&, std::span<const double>) {});
}

inline DppSelection greedy_map(const KernelMatrix& k, std::size_t stop_size) {
  return greedy_map(k.L, stop_size);
}

}  // namespace slaterank
