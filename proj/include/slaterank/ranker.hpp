#pragma once

// Two-stage slate ranking: policy scores → DPP prefix over the visible slots
// → remaining widgets appended in score order.

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "slaterank/bandit.hpp"
#include "slaterank/context.hpp"
#include "slaterank/dpp.hpp"
#include "slaterank/errors.hpp"
#include "slaterank/random.hpp"

namespace slaterank {

struct Candidate {
  std::string widget_id;
  ContextVector context;
  Vec features;  // feature space the DPP measures similarity in
};

struct CandidateSet {
  long long round = 0;
  std::vector<Candidate> widgets;

  std::size_t size() const noexcept { return widgets.size(); }

  std::vector<ContextVector> contexts() const {
    std::vector<ContextVector> out;
    out.reserve(widgets.size());
    for (const auto& w : widgets) out.push_back(w.context);
    return out;
  }
};

struct RankedSlate {
  std::vector<std::string> order;
  std::vector<std::size_t> indices;  // candidate index at each position
  std::vector<double> scores;        // policy score at each position
  std::size_t dpp_prefix_len = 0;
};

/// Ranks candidates given one policy score per candidate. θ = 1 bypasses the
/// DPP; otherwise the DPP fills the first min(slots, K) positions.
inline RankedSlate rank_scored(const CandidateSet& cand, std::span<const double> scores,
                               double theta, std::size_t slots) {
  const std::size_t n = cand.size();
  if (n == 0) throw DimensionMismatch("rank: empty candidate set");
  if (scores.size() != n) throw DimensionMismatch("rank: one score per candidate required");
  if (slots == 0) throw OutOfRange("rank: slots must be >= 1");
  if (!(theta >= 0.0 && theta <= 1.0)) throw ThetaOutOfRange("rank: theta must be in [0, 1]");
  if (!all_finite(scores)) throw OutOfRange("rank: non-finite score");

  RankedSlate slate;
  std::vector<bool> placed(n, false);
  if (theta < 1.0 && n > 1) {
    std::vector<Vec> features;
    std::vector<std::string> ids;
    features.reserve(n);
    ids.reserve(n);
    for (const auto& w : cand.widgets) {
      features.push_back(w.features);
      ids.push_back(w.widget_id);
    }
    const Matrix sim = similarity_from_features(features, ids);
    const KernelMatrix kernel = build_kernel(scores, sim, theta);
    const DppSelection sel = greedy_map(kernel, std::min(slots, n));
    for (std::size_t idx : sel.order) {
      slate.indices.push_back(idx);
      placed[idx] = true;
    }
    slate.dpp_prefix_len = sel.order.size();
  }

  std::vector<std::size_t> rest;
  rest.reserve(n - slate.indices.size());
  for (std::size_t i = 0; i < n; ++i)
    if (!placed[i]) rest.push_back(i);
  std::sort(rest.begin(), rest.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return cand.widgets[a].widget_id < cand.widgets[b].widget_id;
  });
  slate.indices.insert(slate.indices.end(), rest.begin(), rest.end());

  slate.order.reserve(n);
  slate.scores.reserve(n);
  for (std::size_t idx : slate.indices) {
    slate.order.push_back(cand.widgets[idx].widget_id);
    slate.scores.push_back(scores[idx]);
  }
  return slate;
}

inline std::vector<double> scores_of(const std::vector<ScoredArm>& arms) {
  std::vector<double> out;
  out.reserve(arms.size());
  for (const auto& a : arms) out.push_back(a.score);
  return out;
}

/// Scores with the bandit, then ranks.
inline RankedSlate rank_round(const BanditState& state, const CandidateSet& cand, BanditKind kind,
                              double theta, std::size_t slots, std::uint64_t seed) {
  const auto contexts = cand.contexts();
  return rank_scored(cand, scores_of(score(state, kind, contexts, seed)), theta, slots);
}

/// True when `slate` lists every candidate exactly once.
inline bool is_permutation_of(const RankedSlate& slate, const CandidateSet& cand) {
  if (slate.order.size() != cand.size()) return false;
  std::vector<std::string> a = slate.order;
  std::vector<std::string> b;
  b.reserve(cand.size());
  for (const auto& w : cand.widgets) b.push_back(w.widget_id);
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b && std::adjacent_find(a.begin(), a.end()) == a.end();
}

// ---------------------------------------------------------------------------
// Feedback

struct Observation {
  std::string widget_id;
  double reward = 0.0;
};

/// One observation per impressed position (the first `depth` of the slate).
inline std::vector<Observation> observe_impressions(const RankedSlate& slate, std::size_t depth,
                                                    const std::vector<std::string>& clicked) {
  depth = std::min(depth, slate.order.size());
  std::vector<Observation> out;
  out.reserve(depth);
  for (std::size_t pos = 0; pos < depth; ++pos) {
    const bool click =
        std::find(clicked.begin(), clicked.end(), slate.order[pos]) != clicked.end();
    out.push_back({slate.order[pos], click ? 1.0 : 0.0});
  }
  return out;
}

/// (context, action, reward) records for the observed widgets.
inline InteractionBatch collect_feedback(const CandidateSet& cand, const RankedSlate& slate,
                                         std::span<const Observation> observed) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t pos = 0; pos < slate.order.size(); ++pos)
    index.emplace(slate.order[pos], slate.indices[pos]);
  InteractionBatch batch;
  batch.records.reserve(observed.size());
  for (const auto& obs : observed) {
    auto it = index.find(obs.widget_id);
    if (it == index.end()) throw UnknownWidget("collect_feedback: " + obs.widget_id + " not in slate");
    batch.records.push_back({cand.widgets[it->second].context, obs.widget_id, obs.reward});
  }
  return batch;
}

// ---------------------------------------------------------------------------
// Policies. Every policy produces one score per candidate and runs through
// the same ranking pipeline.

enum class PolicyKind { ucb, ts, random, popularity };

inline std::string to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::ucb: return "ucb";
    case PolicyKind::ts: return "ts";
    case PolicyKind::random: return "random";
    case PolicyKind::popularity: return "popularity";
  }
  return "unknown";
}

class Policy {
 public:
  virtual ~Policy() = default;
  virtual PolicyKind kind() const = 0;
  virtual std::vector<double> score(const CandidateSet& cand, std::uint64_t seed) const = 0;
  virtual void update(const InteractionBatch& batch) = 0;
};

class BanditPolicy final : public Policy {
 public:
  BanditPolicy(BanditKind kind, BanditState state) : kind_(kind), state_(std::move(state)) {}

  PolicyKind kind() const override {
    return kind_ == BanditKind::ucb ? PolicyKind::ucb : PolicyKind::ts;
  }

  std::vector<double> score(const CandidateSet& cand, std::uint64_t seed) const override {
    const auto contexts = cand.contexts();
    return scores_of(slaterank::score(state_, kind_, contexts, seed));
  }

  void update(const InteractionBatch& batch) override { state_ = update_batch(state_, batch); }

  const BanditState& state() const noexcept { return state_; }

 private:
  BanditKind kind_;
  BanditState state_;
};

class RandomPolicy final : public Policy {
 public:
  PolicyKind kind() const override { return PolicyKind::random; }

  std::vector<double> score(const CandidateSet& cand, std::uint64_t seed) const override {
    Rng rng(seed);
    std::vector<double> out(cand.size());
    for (double& s : out) s = uniform01(rng);
    return out;
  }

  void update(const InteractionBatch&) override {}
};

/// Ranks by observed CTR. Unseen widgets, and the first impression of each,
/// are shrunk towards the global CTR with a one-impression prior.
class PopularityPolicy final : public Policy {
 public:
  PolicyKind kind() const override { return PolicyKind::popularity; }

  std::vector<double> score(const CandidateSet& cand, std::uint64_t) const override {
    const double global = impressions_ > 0 ? clicks_ / impressions_ : 0.0;
    std::vector<double> out;
    out.reserve(cand.size());
    for (const auto& w : cand.widgets) {
      auto it = stats_.find(w.widget_id);
      const double c = it == stats_.end() ? 0.0 : it->second.first;
      const double n = it == stats_.end() ? 0.0 : it->second.second;
      out.push_back((c + global) / (n + 1.0));
    }
    return out;
  }

  void update(const InteractionBatch& batch) override {
    for (const auto& r : batch.records) {
      auto& [c, n] = stats_[r.action];
      c += r.reward;
      n += 1.0;
      clicks_ += r.reward;
      impressions_ += 1.0;
    }
  }

 private:
  std::unordered_map<std::string, std::pair<double, double>> stats_;
  double clicks_ = 0.0;
  double impressions_ = 0.0;
};

}  // namespace slaterank
