#pragma once

// Offline replay: train on the leading part of a round log, then re-rank
// every held-out slate and score it against the logged clicks.

#include <cmath>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "slaterank/bandit.hpp"
#include "slaterank/context.hpp"
#include "slaterank/errors.hpp"
#include "slaterank/metrics.hpp"
#include "slaterank/ranker.hpp"
#include "slaterank/round_log.hpp"
#include "slaterank/simenv.hpp"

namespace slaterank {

/// Rebuilds contexts for logged (user, widget, round) triples.
class ContextSource {
 public:
  virtual ~ContextSource() = default;
  virtual std::size_t z() const = 0;
  virtual ContextVector context(const std::string& user, const std::string& widget,
                                long long t) const = 0;
  virtual Vec item_features(const std::string& widget) const = 0;
};

/// Contexts from a regenerated synthetic world.
class WorldContextSource final : public ContextSource {
 public:
  WorldContextSource(const World& world, long long clock_offset, DppFeatureSpace space)
      : world_(&world), clock_offset_(clock_offset), space_(space) {
    for (std::size_t i = 0; i < world.users.size(); ++i) users_.emplace(world.users[i].id, i);
    for (std::size_t i = 0; i < world.widgets.size(); ++i)
      widgets_.emplace(world.widgets[i].meta.id, i);
  }

  std::size_t z() const override { return world_->layout.z(); }

  ContextVector context(const std::string& user, const std::string& widget,
                        long long t) const override {
    const long long minute = (clock_offset_ + t - 1) * world_->config.minutes_per_round;
    return world_->context(user_index(user), widget_index(widget), minute);
  }

  Vec item_features(const std::string& widget) const override {
    if (space_ == DppFeatureSpace::context)
      throw ConfigError("dpp_features", "replay supports only the widget feature space");
    return world_->item_features(widget_index(widget));
  }

 private:
  std::size_t user_index(const std::string& id) const {
    auto it = users_.find(id);
    if (it == users_.end()) throw SchemaError(0, "unknown user " + id);
    return it->second;
  }
  std::size_t widget_index(const std::string& id) const {
    auto it = widgets_.find(id);
    if (it == widgets_.end()) throw UnknownWidget("unknown widget " + id);
    return it->second;
  }

  const World* world_;
  long long clock_offset_;
  DppFeatureSpace space_;
  std::unordered_map<std::string, std::size_t> users_;
  std::unordered_map<std::string, std::size_t> widgets_;
};

/// Contexts from ingested embeddings and an interaction log. Users carry no
/// revenue block; round t maps to minute t − 1.
class FileContextSource final : public ContextSource {
 public:
  FileContextSource(const std::vector<EmbeddingRecord>& users,
                    const std::vector<EmbeddingRecord>& widgets,
                    const InteractionMatrix& interactions, std::size_t svd_rank) {
    if (users.empty() || widgets.empty())
      throw SchemaError(0, "embedding files must contain at least one record");
    layout_ = {users.front().vector.size(), widgets.front().vector.size(), svd_rank, 0};
    for (const auto& u : users) users_.emplace(u.id, UserProfile{u.id, u.vector, {}});
    for (const auto& w : widgets) widgets_.emplace(w.id, WidgetMeta{w.id, w.vector, true});
    svd_ = factorize_interactions(interactions, svd_rank);
  }

  std::size_t z() const override { return layout_.z(); }

  ContextVector context(const std::string& user, const std::string& widget,
                        long long t) const override {
    auto u = users_.find(user);
    if (u == users_.end()) throw SchemaError(0, "no embedding for user " + user);
    const long long minute = std::max(0LL, t - 1);
    return build_context(layout_, u->second, widget_meta(widget), svd_, temporal_at_minute(minute),
                         minute);
  }

  Vec item_features(const std::string& widget) const override {
    Vec f = widget_meta(widget).features;
    f.resize(layout_.widget_dim + layout_.svd_rank, 0.0);
    if (auto it = svd_.widget.find(widget); it != svd_.widget.end())
      std::copy(it->second.begin(), it->second.end(),
                f.begin() + static_cast<std::ptrdiff_t>(layout_.widget_dim));
    return f;
  }

 private:
  const WidgetMeta& widget_meta(const std::string& id) const {
    auto it = widgets_.find(id);
    if (it == widgets_.end()) throw UnknownWidget("no embedding for widget " + id);
    return it->second;
  }

  ContextLayout layout_;
  std::unordered_map<std::string, UserProfile> users_;
  std::unordered_map<std::string, WidgetMeta> widgets_;
  SvdFactors svd_;
};

struct ReplayOptions {
  double theta = 1.0;
  std::size_t slots = 10;
  std::size_t window = 10;
  std::size_t batch_size = 50;
  double train_fraction = 0.5;
  std::uint64_t seed = 1;
};

struct ReplayReport {
  double ndcg = std::numeric_limits<double>::quiet_NaN();
  double ilad = std::numeric_limits<double>::quiet_NaN();
  double ilmd = std::numeric_limits<double>::quiet_NaN();
  double ctr = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> cumulative_regret;  // of the logged policy, when the log has truth
  std::size_t train_rounds = 0;
  std::size_t holdout_rounds = 0;
  std::size_t ndcg_lists = 0;
  std::size_t skipped_without_clicks = 0;
  std::size_t diversity_excluded = 0;
  bool holdout_without_clicks = false;
};

namespace detail {

inline CandidateSet logged_candidates(const RoundLog& log, const ContextSource& src) {
  CandidateSet cand;
  cand.round = log.t;
  for (const auto& id : log.slate) {
    Candidate c;
    c.widget_id = id;
    c.context = src.context(log.user, id, log.t);
    c.features = src.item_features(id);
    cand.widgets.push_back(std::move(c));
  }
  return cand;
}

}  // namespace detail

/// Trains `policy` on the first train_fraction of `logs` (impressed
/// positions only, one update per batch_size rounds), then scores held-out
/// rounds with binary click relevance over the top `window` positions.
inline ReplayReport replay_eval(std::span<const RoundLog> logs, const ContextSource& src,
                                Policy& policy, const ReplayOptions& opts) {
  if (!(opts.train_fraction >= 0.0 && opts.train_fraction < 1.0))
    throw ConfigError("replay.train_fraction", "must be in [0, 1)");
  if (opts.batch_size == 0) throw ConfigError("env.batch_size", "must be >= 1");
  const auto n_train = static_cast<std::size_t>(std::floor(opts.train_fraction * double(logs.size())));
  ReplayReport report;
  report.train_rounds = n_train;
  report.holdout_rounds = logs.size() - n_train;
  if (report.holdout_rounds == 0) throw EmptyHoldout("replay: no held-out rounds");

  InteractionBatch pending;
  for (std::size_t i = 0; i < n_train; ++i) {
    const RoundLog& log = logs[i];
    for (std::size_t pos = 0; pos < log.impressed; ++pos) {
      const auto& id = log.slate[pos];
      const bool click = std::find(log.clicks.begin(), log.clicks.end(), id) != log.clicks.end();
      pending.records.push_back({src.context(log.user, id, log.t), id, click ? 1.0 : 0.0});
    }
    if ((i + 1) % opts.batch_size == 0) policy.update(std::exchange(pending, {}));
  }
  if (!pending.empty()) policy.update(pending);

  std::vector<double> ndcgs, ilads, ilmds;
  std::size_t clicks = 0, impressions = 0;
  const bool has_truth = std::all_of(logs.begin() + static_cast<std::ptrdiff_t>(n_train), logs.end(),
                                     [](const RoundLog& l) { return !l.true_p.empty(); });
  double regret = 0.0;
  for (std::size_t i = n_train; i < logs.size(); ++i) {
    const RoundLog& log = logs[i];
    clicks += log.clicks.size();
    impressions += log.impressed;
    if (has_truth) {
      regret += round_regret(log);
      report.cumulative_regret.push_back(regret);
    }
    if (log.slate.empty()) continue;

    const CandidateSet cand = detail::logged_candidates(log, src);
    const auto scores = policy.score(cand, derive_seed(opts.seed, 200, static_cast<std::uint64_t>(i)));
    const RankedSlate slate = rank_scored(cand, scores, opts.theta, opts.slots);
    const std::size_t window = std::min(opts.window, slate.order.size());

    std::vector<double> rel(slate.order.size(), 0.0);
    for (std::size_t pos = 0; pos < slate.order.size(); ++pos)
      if (std::find(log.clicks.begin(), log.clicks.end(), slate.order[pos]) != log.clicks.end())
        rel[pos] = 1.0;
    if (auto v = ndcg(rel, window)) {
      ndcgs.push_back(*v);
    } else {
      ++report.skipped_without_clicks;
    }

    std::vector<Vec> feats;
    std::vector<std::string> ids;
    for (std::size_t pos = 0; pos < window; ++pos) {
      feats.push_back(cand.widgets[slate.indices[pos]].features);
      ids.push_back(slate.order[pos]);
    }
    std::vector<std::size_t> all(window);
    for (std::size_t k = 0; k < window; ++k) all[k] = k;
    if (auto d = list_distance(all, similarity_from_features(feats, ids))) {
      ilads.push_back(d->mean);
      ilmds.push_back(d->min);
    } else {
      ++report.diversity_excluded;
    }
  }

  report.ndcg_lists = ndcgs.size();
  report.holdout_without_clicks = ndcgs.empty();
  if (!ndcgs.empty()) report.ndcg = mean(ndcgs);
  if (!ilads.empty()) {
    report.ilad = mean(ilads);
    report.ilmd = mean(ilmds);
  }
  if (impressions > 0) report.ctr = double(clicks) / double(impressions);
  return report;
}

}  // namespace slaterank
