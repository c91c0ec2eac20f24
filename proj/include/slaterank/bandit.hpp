#pragma once

// Linear contextual bandits (LinUCB, linear Thompson sampling) sharing a
// single ridge estimator across all arms, updated from delayed batches with
// a forgetting factor on the data part of the design matrix.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "slaterank/context.hpp"
#include "slaterank/errors.hpp"
#include "slaterank/numerics.hpp"
#include "slaterank/random.hpp"

namespace slaterank {

enum class BanditKind { ucb, ts };

struct InteractionRecord {
  ContextVector context;
  std::string action;  // widget id
  double reward = 0.0;  // click = 1, impression without click = 0
};

struct InteractionBatch {
  std::vector<InteractionRecord> records;

  bool empty() const noexcept { return records.empty(); }
  std::size_t size() const noexcept { return records.size(); }
};

struct ScoredArm {
  std::string widget_id;
  double mean = 0.0;   // φᵀx
  double width = 0.0;  // exploration bonus; 0 for Thompson sampling
  double score = 0.0;
};

/// Immutable snapshot of the shared estimator. A is factored once on
/// construction; scoring reuses the factor.
class BanditState {
 public:
  BanditState(Matrix design, Vec response, double alpha, double gamma, long long round = 0)
      : design_(std::move(design)),
        response_(std::move(response)),
        alpha_(alpha),
        gamma_(gamma),
        round_(round),
        factor_(cholesky(check_shapes(design_, response_))) {
    if (!(alpha_ >= 0.0) || !std::isfinite(alpha_)) throw OutOfRange("alpha must be >= 0");
    if (!(gamma_ >= 0.0 && gamma_ <= 1.0)) throw OutOfRange("gamma must be in [0, 1]");
    if (!all_finite(response_)) throw OutOfRange("response vector has non-finite entries");
    coefficients_ = factor_.solve(response_);
  }

  /// A = I, b = 0.
  static BanditState fresh(std::size_t z, double alpha, double gamma) {
    if (z == 0) throw DimensionMismatch("bandit dimension must be positive");
    return BanditState(Matrix::identity(z), Vec(z, 0.0), alpha, gamma, 0);
  }

  std::size_t z() const noexcept { return response_.size(); }
  const Matrix& design() const noexcept { return design_; }
  const Vec& response() const noexcept { return response_; }
  double alpha() const noexcept { return alpha_; }
  double gamma() const noexcept { return gamma_; }
  long long round() const noexcept { return round_; }
  const CholeskyFactor& factor() const noexcept { return factor_; }
  const Vec& coefficients() const noexcept { return coefficients_; }

  BanditState with_alpha(double alpha) const {
    return BanditState(design_, response_, alpha, gamma_, round_);
  }

 private:
  static const Matrix& check_shapes(const Matrix& a, const Vec& b) {
    if (!a.square() || a.rows() != b.size())
      throw DimensionMismatch("bandit: design matrix and response vector disagree");
    return a;
  }

  Matrix design_;
  Vec response_;
  double alpha_;
  double gamma_;
  long long round_;
  CholeskyFactor factor_;
  Vec coefficients_;
};

/// φ solving A φ = b.
inline Vec coefficients(const BanditState& s) { return s.coefficients(); }

namespace detail {

inline void check_arms(const BanditState& s, std::span<const ContextVector> arms) {
  if (arms.empty()) throw DimensionMismatch("scoring needs at least one arm");
  for (const auto& a : arms)
    if (a.x.size() != s.z())
      throw DimensionMismatch("context of " + a.widget_id + " has length " +
                              std::to_string(a.x.size()) + ", expected " +
                              std::to_string(s.z()));
}

}  // namespace detail

/// p = φᵀx + α·√(xᵀA⁻¹x), one (A, b) pair for every arm.
inline std::vector<ScoredArm> score_ucb(const BanditState& s, std::span<const ContextVector> arms) {
  detail::check_arms(s, arms);
  std::vector<ScoredArm> out;
  out.reserve(arms.size());
  for (const auto& a : arms) {
    ScoredArm arm;
    arm.widget_id = a.widget_id;
    arm.mean = dot(s.coefficients(), a.x);
    arm.width = s.alpha() == 0.0 ? 0.0 : s.alpha() * std::sqrt(s.factor().inverse_quad_form(a.x));
    arm.score = arm.mean + arm.width;
    out.push_back(std::move(arm));
  }
  return out;
}

/// Draws φ̃ ~ N(φ, α²A⁻¹) once and scores every arm with it. With A = LLᵀ,
/// φ̃ = φ + α·L⁻ᵀξ has exactly that covariance.
inline Vec sample_coefficients(const BanditState& s, std::uint64_t seed) {
  Vec phi = s.coefficients();
  if (s.alpha() == 0.0) return phi;
  Rng rng(seed);
  Vec xi(s.z());
  for (double& v : xi) v = standard_normal(rng);
  const Vec offset = s.factor().backward(xi);
  for (std::size_t i = 0; i < phi.size(); ++i) phi[i] += s.alpha() * offset[i];
  return phi;
}

inline std::vector<ScoredArm> score_ts(const BanditState& s, std::span<const ContextVector> arms,
                                       std::uint64_t seed) {
  detail::check_arms(s, arms);
  const Vec sample = sample_coefficients(s, seed);
  std::vector<ScoredArm> out;
  out.reserve(arms.size());
  for (const auto& a : arms) {
    ScoredArm arm;
    arm.widget_id = a.widget_id;
    arm.mean = dot(s.coefficients(), a.x);
    arm.score = dot(sample, a.x);
    out.push_back(std::move(arm));
  }
  return out;
}

inline std::vector<ScoredArm> score(const BanditState& s, BanditKind kind,
                                    std::span<const ContextVector> arms, std::uint64_t seed) {
  return kind == BanditKind::ucb ? score_ucb(s, arms) : score_ts(s, arms, seed);
}

/// A' = I + γ(A − I) + Σxxᵀ,  b' = γb + Σrx. The identity prior is never decayed.
inline BanditState update_batch(const BanditState& s, const InteractionBatch& batch) {
  const std::size_t z = s.z();
  Matrix a = s.design();
  Vec b = s.response();
  const double g = s.gamma();
  if (g != 1.0) {
    for (std::size_t i = 0; i < z; ++i) {
      for (std::size_t j = 0; j < z; ++j) {
        const double prior = i == j ? 1.0 : 0.0;
        a(i, j) = prior + g * (a(i, j) - prior);
      }
      b[i] *= g;
    }
  }
  for (const auto& rec : batch.records) {
    const Vec& x = rec.context.x;
    if (x.size() != z)
      throw DimensionMismatch("update_batch: record for " + rec.action + " has wrong length");
    add_outer(a, x);
    for (std::size_t i = 0; i < z; ++i) b[i] += rec.reward * x[i];
  }
  return BanditState(std::move(a), std::move(b), s.alpha(), g, s.round() + 1);
}

// ---------------------------------------------------------------------------
// Snapshot persistence: {z, alpha, gamma, round, A, b}, A row-major.

inline nlohmann::json to_json(const BanditState& s) {
  const auto a = s.design().data();
  return {{"z", s.z()},
          {"alpha", s.alpha()},
          {"gamma", s.gamma()},
          {"round", s.round()},
          {"A", std::vector<double>(a.begin(), a.end())},
          {"b", s.response()}};
}

inline BanditState bandit_state_from_json(const nlohmann::json& j) {
  try {
    const auto z = j.at("z").get<std::size_t>();
    const auto a = j.at("A").get<std::vector<double>>();
    const auto b = j.at("b").get<std::vector<double>>();
    if (a.size() != z * z || b.size() != z)
      throw SchemaError(0, "bandit snapshot: A or b does not match z");
    Matrix design(z, z);
    std::copy(a.begin(), a.end(), design.data().begin());
    return BanditState(std::move(design), b, j.at("alpha").get<double>(),
                       j.at("gamma").get<double>(), j.at("round").get<long long>());
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(0, std::string("bandit snapshot: ") + e.what());
  }
}

}  // namespace slaterank
