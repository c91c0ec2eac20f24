#pragma once

// Context vector assembly. Layout of x, in order:
//   [ u_v (d) | w_v (m) | u_svd (k) | w_svd (k) | revenue (r) | temporal (6) ]

#include <cmath>
#include <cstddef>
#include <istream>
#include <map>
#include <numbers>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "slaterank/errors.hpp"
#include "slaterank/numerics.hpp"

namespace slaterank {

struct UserProfile {
  std::string id;
  Vec embedding;  // u_v, may hold several pre-concatenated horizons
  Vec revenue;    // e.g. sessions per week, average basket size
};

struct WidgetMeta {
  std::string id;
  Vec features;  // w_v
  bool active = true;
};

/// Non-negative user × widget interaction counts. Ids are kept sorted.
struct InteractionMatrix {
  std::vector<std::string> user_ids;
  std::vector<std::string> widget_ids;
  Matrix counts;
};

struct SvdFactors {
  std::size_t k = 0;
  std::unordered_map<std::string, Vec> user;
  std::unordered_map<std::string, Vec> widget;
};

struct TemporalFeatures {
  int hour_of_day = 0;  // 0..23
  int day_of_week = 0;  // 0..6
  int day_of_year = 1;  // 1..366
};

struct ContextVector {
  Vec x;
  std::string user_id;
  std::string widget_id;
  long long timestamp = 0;
};

inline constexpr std::size_t kTemporalDim = 6;

/// Block sizes of the context vector.
struct ContextLayout {
  std::size_t user_dim = 0;     // d
  std::size_t widget_dim = 0;   // m
  std::size_t svd_rank = 0;     // k
  std::size_t revenue_dim = 0;

  std::size_t z() const noexcept {
    return user_dim + widget_dim + 2 * svd_rank + revenue_dim + kTemporalDim;
  }
  std::size_t widget_offset() const noexcept { return user_dim; }
  std::size_t user_svd_offset() const noexcept { return user_dim + widget_dim; }
  std::size_t widget_svd_offset() const noexcept { return user_svd_offset() + svd_rank; }
  std::size_t revenue_offset() const noexcept { return widget_svd_offset() + svd_rank; }
  std::size_t temporal_offset() const noexcept { return revenue_offset() + revenue_dim; }
};

/// Symmetric singular-value split: u_svd = U_i·√Σ, w_svd = V_j·√Σ.
inline SvdFactors factorize_interactions(const InteractionMatrix& m, std::size_t k) {
  if (m.counts.rows() != m.user_ids.size() || m.counts.cols() != m.widget_ids.size())
    throw DimensionMismatch("factorize_interactions: id maps do not match the matrix");
  const TruncatedSvd svd = truncated_svd(m.counts, k);
  SvdFactors out;
  out.k = k;
  Vec root(k);
  for (std::size_t j = 0; j < k; ++j) root[j] = std::sqrt(svd.values[j]);
  for (std::size_t i = 0; i < m.user_ids.size(); ++i) {
    Vec v(k);
    for (std::size_t j = 0; j < k; ++j) v[j] = svd.left(i, j) * root[j];
    out.user.emplace(m.user_ids[i], std::move(v));
  }
  for (std::size_t i = 0; i < m.widget_ids.size(); ++i) {
    Vec v(k);
    for (std::size_t j = 0; j < k; ++j) v[j] = svd.right(i, j) * root[j];
    out.widget.emplace(m.widget_ids[i], std::move(v));
  }
  return out;
}

/// Cyclic (sin, cos) pairs for hour, day of week and day of year.
inline Vec encode_temporal(const TemporalFeatures& t) {
  if (t.hour_of_day < 0 || t.hour_of_day > 23) throw OutOfRange("hour_of_day must be in 0..23");
  if (t.day_of_week < 0 || t.day_of_week > 6) throw OutOfRange("day_of_week must be in 0..6");
  if (t.day_of_year < 1 || t.day_of_year > 366) throw OutOfRange("day_of_year must be in 1..366");
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double hour = two_pi * t.hour_of_day / 24.0;
  const double dow = two_pi * t.day_of_week / 7.0;
  const double doy = two_pi * (t.day_of_year - 1) / 366.0;
  return {std::sin(hour), std::cos(hour), std::sin(dow),
          std::cos(dow),  std::sin(doy),  std::cos(doy)};
}

/// Calendar features of a minute count since an epoch that starts on
/// day-of-year `start_doy` and day-of-week 0.
inline TemporalFeatures temporal_at_minute(long long minute, int start_doy = 1) {
  const long long day = minute / 1440;
  TemporalFeatures t;
  t.hour_of_day = static_cast<int>((minute / 60) % 24);
  t.day_of_week = static_cast<int>(day % 7);
  t.day_of_year = static_cast<int>((start_doy - 1 + day) % 365) + 1;
  return t;
}

namespace detail {

inline void put(Vec& out, std::size_t offset, std::span<const double> src) {
  std::copy(src.begin(), src.end(), out.begin() + static_cast<std::ptrdiff_t>(offset));
}

}  // namespace detail

/// Concatenates all blocks; ids missing from `svd` get zero SVD slices.
inline ContextVector build_context(const ContextLayout& layout, const UserProfile& u,
                                   const WidgetMeta& w, const SvdFactors& svd,
                                   const TemporalFeatures& t, long long timestamp = 0) {
  if (u.embedding.size() != layout.user_dim)
    throw DimensionMismatch("build_context: user embedding of " + u.id + " has wrong length");
  if (w.features.size() != layout.widget_dim)
    throw DimensionMismatch("build_context: widget features of " + w.id + " have wrong length");
  if (u.revenue.size() != layout.revenue_dim)
    throw DimensionMismatch("build_context: revenue features of " + u.id + " have wrong length");
  if (svd.k != layout.svd_rank)
    throw DimensionMismatch("build_context: svd rank does not match layout");

  ContextVector cv;
  cv.user_id = u.id;
  cv.widget_id = w.id;
  cv.timestamp = timestamp;
  cv.x.assign(layout.z(), 0.0);
  detail::put(cv.x, 0, u.embedding);
  detail::put(cv.x, layout.widget_offset(), w.features);
  if (auto it = svd.user.find(u.id); it != svd.user.end())
    detail::put(cv.x, layout.user_svd_offset(), it->second);
  if (auto it = svd.widget.find(w.id); it != svd.widget.end())
    detail::put(cv.x, layout.widget_svd_offset(), it->second);
  detail::put(cv.x, layout.revenue_offset(), u.revenue);
  detail::put(cv.x, layout.temporal_offset(), encode_temporal(t));
  return cv;
}

// ---------------------------------------------------------------------------
// JSON-lines ingestion

struct EmbeddingRecord {
  std::string id;
  Vec vector;
};

namespace detail {

template <typename Fn>
void for_each_json_line(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw SchemaError(lineno, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw SchemaError(lineno, "expected a JSON object");
    fn(j, lineno);
  }
}

inline std::string require_string(const nlohmann::json& j, const char* key, std::size_t line) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string())
    throw SchemaError(line, std::string("missing string field '") + key + "'");
  return it->get<std::string>();
}

}  // namespace detail

/// Reads `{"id": string, "vector": [real, ...]}` records. All vectors must
/// share one length.
inline std::vector<EmbeddingRecord> read_embeddings(std::istream& in) {
  std::vector<EmbeddingRecord> out;
  detail::for_each_json_line(in, [&](const nlohmann::json& j, std::size_t line) {
    EmbeddingRecord rec;
    rec.id = detail::require_string(j, "id", line);
    auto it = j.find("vector");
    if (it == j.end() || !it->is_array()) throw SchemaError(line, "missing array field 'vector'");
    for (const auto& v : *it) {
      if (!v.is_number()) throw SchemaError(line, "non-numeric vector entry");
      rec.vector.push_back(v.get<double>());
    }
    if (!all_finite(rec.vector)) throw SchemaError(line, "non-finite vector entry");
    if (!out.empty() && out.front().vector.size() != rec.vector.size())
      throw SchemaError(line, "vector length differs from earlier records");
    out.push_back(std::move(rec));
  });
  return out;
}

/// Reads `{"user": string, "widget": string, "count": integer >= 1}` records.
/// Repeated pairs accumulate.
inline InteractionMatrix read_interactions(std::istream& in) {
  std::map<std::pair<std::string, std::string>, double> cells;
  std::map<std::string, std::size_t> users;
  std::map<std::string, std::size_t> widgets;
  detail::for_each_json_line(in, [&](const nlohmann::json& j, std::size_t line) {
    std::string user = detail::require_string(j, "user", line);
    std::string widget = detail::require_string(j, "widget", line);
    auto it = j.find("count");
    if (it == j.end() || !it->is_number_integer())
      throw SchemaError(line, "missing integer field 'count'");
    const auto count = it->get<long long>();
    if (count < 1) throw SchemaError(line, "count must be >= 1");
    users.emplace(user, 0);
    widgets.emplace(widget, 0);
    cells[{std::move(user), std::move(widget)}] += static_cast<double>(count);
  });

  InteractionMatrix m;
  for (auto& [id, idx] : users) {
    idx = m.user_ids.size();
    m.user_ids.push_back(id);
  }
  for (auto& [id, idx] : widgets) {
    idx = m.widget_ids.size();
    m.widget_ids.push_back(id);
  }
  m.counts = Matrix(m.user_ids.size(), m.widget_ids.size());
  for (const auto& [key, count] : cells) m.counts(users[key.first], widgets[key.second]) = count;
  return m;
}

}  // namespace slaterank
