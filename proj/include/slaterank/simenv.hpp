#pragma once

// Synthetic widget economy: seeded users and clustered widgets, a logistic
// click model over the context vector, widget churn, scroll-depth
// impressions and the batched round loop.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "slaterank/bandit.hpp"
#include "slaterank/context.hpp"
#include "slaterank/errors.hpp"
#include "slaterank/metrics.hpp"
#include "slaterank/numerics.hpp"
#include "slaterank/random.hpp"
#include "slaterank/ranker.hpp"
#include "slaterank/round_log.hpp"

namespace slaterank {

struct EnvConfig {
  std::size_t n_users = 200;
  std::size_t n_widgets = 50;  // active at round 0
  std::size_t slots = 10;      // l
  std::size_t user_dim = 3;    // d
  std::size_t widget_dim = 4;  // m
  std::size_t svd_rank = 1;    // k
  std::size_t revenue_dim = 1;
  std::size_t n_clusters = 5;
  double cluster_spread = 0.5;
  double base_logit = -2.0;
  double signal = 0.5;  // scale of the true coefficients on widget features
  double noise = 0.0;   // std of per-impression logit noise
  double interaction_rate = 1.0;
  std::size_t batch_size = 50;
  double arrival_rate = 0.0;  // expected new widgets per round
  double removal_rate = 0.0;  // expected removals per round
  double scroll_continue = 0.6;
  std::size_t horizon = 5000;
  long long minutes_per_round = 1;
  int start_day_of_year = 1;
  std::uint64_t seed = 1;

  ContextLayout layout() const { return {user_dim, widget_dim, svd_rank, revenue_dim}; }

  void validate() const {
    auto positive = [](std::size_t v, const char* name) {
      if (v == 0) throw ConfigError(std::string("env.") + name, "must be >= 1");
    };
    positive(n_users, "n_users");
    positive(n_widgets, "n_widgets");
    positive(slots, "slots");
    positive(widget_dim, "widget_dim");
    positive(n_clusters, "n_clusters");
    positive(batch_size, "batch_size");
    positive(horizon, "horizon");
    if (svd_rank > std::min(n_users, n_widgets))
      throw ConfigError("env.svd_rank", "exceeds min(n_users, n_widgets)");
    auto non_negative = [](double v, const char* name) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(std::string("env.") + name, "must be >= 0");
    };
    non_negative(cluster_spread, "cluster_spread");
    non_negative(signal, "signal");
    non_negative(noise, "noise");
    non_negative(interaction_rate, "interaction_rate");
    non_negative(arrival_rate, "arrival_rate");
    non_negative(removal_rate, "removal_rate");
    if (!std::isfinite(base_logit)) throw ConfigError("env.base_logit", "must be finite");
    if (!(scroll_continue >= 0.0 && scroll_continue < 1.0))
      throw ConfigError("env.scroll_continue", "must be in [0, 1)");
    if (minutes_per_round < 1) throw ConfigError("env.minutes_per_round", "must be >= 1");
    if (start_day_of_year < 1 || start_day_of_year > 366)
      throw ConfigError("env.start_day_of_year", "must be in 1..366");
  }
};

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

/// Click probability sigmoid(bias + θ*ᵀx).
struct GroundTruth {
  Vec theta_star;
  double bias = 0.0;
  double noise = 0.0;

  double logit(std::span<const double> x) const { return bias + dot(theta_star, x); }
  double probability(std::span<const double> x) const { return sigmoid(logit(x)); }
};

/// A widget and the rounds it is live for: arrival ≤ t < removal.
struct WidgetEntry {
  WidgetMeta meta;
  long long arrival = 0;
  long long removal = std::numeric_limits<long long>::max();

  bool active_at(long long t) const noexcept { return arrival <= t && t < removal; }
};

struct World {
  EnvConfig config;
  ContextLayout layout;
  std::vector<UserProfile> users;
  std::vector<WidgetEntry> widgets;  // ids are zero-padded, so index order = id order
  InteractionMatrix interactions;
  SvdFactors svd;
  GroundTruth truth;

  std::vector<std::size_t> active_at(long long t) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < widgets.size(); ++i)
      if (widgets[i].active_at(t)) out.push_back(i);
    return out;
  }

  ContextVector context(std::size_t user, std::size_t widget, long long minute) const {
    return build_context(layout, users[user], widgets[widget].meta, svd,
                         temporal_at_minute(minute, config.start_day_of_year), minute);
  }

  /// w_v ‖ w_svd (zero SVD slice for widgets without interaction history).
  Vec item_features(std::size_t widget) const {
    Vec f = widgets[widget].meta.features;
    f.resize(layout.widget_dim + layout.svd_rank, 0.0);
    if (auto it = svd.widget.find(widgets[widget].meta.id); it != svd.widget.end())
      std::copy(it->second.begin(), it->second.end(),
                f.begin() + static_cast<std::ptrdiff_t>(layout.widget_dim));
    return f;
  }

  std::size_t widget_index(const std::string& id) const {
    for (std::size_t i = 0; i < widgets.size(); ++i)
      if (widgets[i].meta.id == id) return i;
    throw UnknownWidget("unknown widget " + id);
  }

  std::size_t user_index(const std::string& id) const {
    for (std::size_t i = 0; i < users.size(); ++i)
      if (users[i].id == id) return i;
    throw SchemaError(0, "unknown user " + id);
  }
};

namespace detail {

inline std::string padded_id(char prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%05zu", prefix, i);
  return buf;
}

inline Vec normal_vector(Rng& rng, std::size_t n, double scale) {
  Vec v(n);
  for (double& x : v) x = scale * standard_normal(rng);
  return v;
}

// Stream ids for derive_seed.
enum Stream : std::uint64_t {
  kUsers = 1,
  kWidgets,
  kTruth,
  kInteractions,
  kChurn,
  kPickUser = 11,
  kScroll,
  kClick,
  kPolicy,
  kWarmOffset = 100,
};

}  // namespace detail

/// Deterministic world from cfg.seed, including the full churn timeline up
/// to the horizon.
inline World generate_world(const EnvConfig& cfg) {
  cfg.validate();
  World w;
  w.config = cfg;
  w.layout = cfg.layout();
  const std::size_t z = w.layout.z();

  Rng user_rng(derive_seed(cfg.seed, detail::kUsers));
  for (std::size_t i = 0; i < cfg.n_users; ++i) {
    UserProfile u;
    u.id = detail::padded_id('u', i);
    u.embedding = detail::normal_vector(user_rng, cfg.user_dim, 1.0);
    u.revenue = detail::normal_vector(user_rng, cfg.revenue_dim, 0.5);
    w.users.push_back(std::move(u));
  }

  Rng widget_rng(derive_seed(cfg.seed, detail::kWidgets));
  std::vector<Vec> centers;
  for (std::size_t c = 0; c < cfg.n_clusters; ++c)
    centers.push_back(detail::normal_vector(widget_rng, cfg.widget_dim, 1.0));
  auto draw_widget = [&](Rng& rng) {
    WidgetEntry e;
    e.meta.id = detail::padded_id('w', w.widgets.size());
    const auto cluster = std::uniform_int_distribution<std::size_t>(0, cfg.n_clusters - 1)(rng);
    e.meta.features = centers[cluster];
    for (double& v : e.meta.features) v += cfg.cluster_spread * standard_normal(rng);
    return e;
  };
  for (std::size_t i = 0; i < cfg.n_widgets; ++i) w.widgets.push_back(draw_widget(widget_rng));

  Rng truth_rng(derive_seed(cfg.seed, detail::kTruth));
  w.truth.bias = cfg.base_logit;
  w.truth.noise = cfg.noise;
  w.truth.theta_star.assign(z, 0.0);
  auto fill = [&](std::size_t offset, std::size_t n, double scale) {
    for (std::size_t i = 0; i < n; ++i) w.truth.theta_star[offset + i] = scale * standard_normal(truth_rng);
  };
  const auto& lay = w.layout;
  fill(0, lay.user_dim, 0.3);
  fill(lay.widget_offset(), lay.widget_dim, cfg.signal / std::sqrt(double(lay.widget_dim)));
  fill(lay.user_svd_offset(), lay.svd_rank, 0.2);
  fill(lay.widget_svd_offset(), lay.svd_rank, 0.5 * cfg.signal);
  fill(lay.revenue_offset(), lay.revenue_dim, 0.2);
  fill(lay.temporal_offset(), kTemporalDim, 0.2);

  // Historical interactions follow the same preferences on the feature
  // blocks plus a user–widget affinity term.
  Rng inter_rng(derive_seed(cfg.seed, detail::kInteractions));
  Matrix affinity(cfg.user_dim, cfg.widget_dim);
  for (double& v : affinity.data())
    v = standard_normal(inter_rng) / std::sqrt(double(std::max<std::size_t>(cfg.widget_dim, 1)));
  w.interactions.counts = Matrix(cfg.n_users, cfg.n_widgets);
  for (const auto& u : w.users) w.interactions.user_ids.push_back(u.id);
  for (const auto& e : w.widgets) w.interactions.widget_ids.push_back(e.meta.id);
  for (std::size_t i = 0; i < cfg.n_users; ++i) {
    const Vec pref = cfg.user_dim == 0 ? Vec(cfg.widget_dim, 0.0)
                                       : matvec(transpose(affinity), w.users[i].embedding);
    for (std::size_t j = 0; j < cfg.n_widgets; ++j) {
      const auto& f = w.widgets[j].meta.features;
      double logit = cfg.base_logit + dot(pref, f);
      for (std::size_t a = 0; a < cfg.widget_dim; ++a)
        logit += w.truth.theta_star[lay.widget_offset() + a] * f[a];
      for (std::size_t a = 0; a < cfg.user_dim; ++a)
        logit += w.truth.theta_star[a] * w.users[i].embedding[a];
      const double rate = 3.0 * cfg.interaction_rate * sigmoid(logit);
      w.interactions.counts(i, j) =
          rate > 0.0 ? static_cast<double>(std::poisson_distribution<int>(rate)(inter_rng)) : 0.0;
    }
  }
  w.svd = factorize_interactions(w.interactions, cfg.svd_rank);

  // Churn: arrivals draw fresh widgets; removals pick uniformly among the
  // active ones and never take the catalog below `slots`.
  Rng churn_rng(derive_seed(cfg.seed, detail::kChurn));
  std::vector<std::size_t> active(cfg.n_widgets);
  for (std::size_t i = 0; i < cfg.n_widgets; ++i) active[i] = i;
  for (long long t = 1; t <= static_cast<long long>(cfg.horizon); ++t) {
    const int removals = cfg.removal_rate > 0.0
                             ? std::poisson_distribution<int>(cfg.removal_rate)(churn_rng)
                             : 0;
    for (int r = 0; r < removals && active.size() > cfg.slots; ++r) {
      const auto pick = std::uniform_int_distribution<std::size_t>(0, active.size() - 1)(churn_rng);
      w.widgets[active[pick]].removal = t;
      active.erase(active.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    const int arrivals = cfg.arrival_rate > 0.0
                             ? std::poisson_distribution<int>(cfg.arrival_rate)(churn_rng)
                             : 0;
    for (int a = 0; a < arrivals; ++a) {
      WidgetEntry e = draw_widget(churn_rng);
      e.arrival = t;
      active.push_back(w.widgets.size());
      w.widgets.push_back(std::move(e));
    }
  }
  return w;
}

// ---------------------------------------------------------------------------
// Round loop

enum class DppFeatureSpace { widget, context };

struct SimulationOptions {
  double theta = 1.0;
  std::size_t eval_window = 10;
  DppFeatureSpace dpp_features = DppFeatureSpace::widget;
  long long clock_offset = 0;  // rounds elapsed before round 1 (warm start)
  bool warm = false;           // frozen initial catalog, separate random streams
};

struct StepOutcome {
  RoundLog log;
  CandidateSet candidates;
  RankedSlate slate;
  std::optional<InteractionBatch> batch;
  std::optional<double> ndcg;              // true click probabilities as grades
  std::optional<ListDistance> diversity;   // over the evaluation window
  double regret = 0.0;
};

class Simulation {
 public:
  Simulation(const World& world, SimulationOptions opts) : world_(&world), opts_(opts) {
    if (!(opts_.theta >= 0.0 && opts_.theta <= 1.0))
      throw ConfigError("theta", "must be in [0, 1]");
    if (opts_.eval_window == 0) throw ConfigError("eval_window", "must be >= 1");
  }

  long long round() const noexcept { return t_; }
  std::size_t updates_emitted() const noexcept { return updates_; }

  /// Leftover feedback that has not filled a batch yet.
  InteractionBatch flush() { return std::exchange(pending_, {}); }

  StepOutcome step(const Policy& policy) {
    const World& w = *world_;
    const EnvConfig& cfg = w.config;
    ++t_;
    const std::uint64_t base = opts_.warm ? std::uint64_t{detail::kWarmOffset} : 0;
    const auto t = static_cast<std::uint64_t>(t_);

    Rng user_rng(derive_seed(cfg.seed, base + detail::kPickUser, t));
    const auto user = std::uniform_int_distribution<std::size_t>(0, w.users.size() - 1)(user_rng);
    const long long minute = (opts_.clock_offset + t_ - 1) * cfg.minutes_per_round;

    StepOutcome out;
    out.candidates.round = t_;
    for (std::size_t idx : w.active_at(opts_.warm ? 0 : t_)) {
      Candidate c;
      c.widget_id = w.widgets[idx].meta.id;
      c.context = w.context(user, idx, minute);
      c.features = opts_.dpp_features == DppFeatureSpace::widget ? w.item_features(idx) : c.context.x;
      out.candidates.widgets.push_back(std::move(c));
    }

    const auto scores = policy.score(out.candidates, derive_seed(cfg.seed, base + detail::kPolicy, t));
    out.slate = rank_scored(out.candidates, scores, opts_.theta, cfg.slots);

    auto& log = out.log;
    log.t = t_;
    log.user = w.users[user].id;
    log.slate = out.slate.order;
    log.true_p.reserve(out.slate.indices.size());
    for (std::size_t idx : out.slate.indices)
      log.true_p.push_back(w.truth.probability(out.candidates.widgets[idx].context.x));

    // Truncated geometric scroll depth over the visible slots.
    const std::size_t visible = std::min(cfg.slots, out.candidates.size());
    Rng scroll_rng(derive_seed(cfg.seed, base + detail::kScroll, t));
    std::size_t depth = 1;
    while (depth < visible && uniform01(scroll_rng) < cfg.scroll_continue) ++depth;
    log.impressed = depth;

    Rng click_rng(derive_seed(cfg.seed, base + detail::kClick, t));
    for (std::size_t pos = 0; pos < depth; ++pos) {
      double p = log.true_p[pos];
      if (w.truth.noise > 0.0) {
        const auto& x = out.candidates.widgets[out.slate.indices[pos]].context.x;
        p = sigmoid(w.truth.logit(x) + w.truth.noise * standard_normal(click_rng));
      }
      if (uniform01(click_rng) < p) log.clicks.push_back(log.slate[pos]);
    }

    const auto observed = observe_impressions(out.slate, depth, log.clicks);
    InteractionBatch fresh = collect_feedback(out.candidates, out.slate, observed);
    for (auto& r : fresh.records) pending_.records.push_back(std::move(r));
    if (t % cfg.batch_size == 0) {
      out.batch = flush();
      ++updates_;
    }

    const std::size_t window = std::min(opts_.eval_window, out.slate.order.size());
    out.ndcg = ndcg(log.true_p, window);
    if (window >= 2) {
      std::vector<Vec> feats;
      std::vector<std::string> ids;
      for (std::size_t pos = 0; pos < window; ++pos) {
        const auto& c = out.candidates.widgets[out.slate.indices[pos]];
        feats.push_back(c.features);
        ids.push_back(c.widget_id);
      }
      const Matrix s = similarity_from_features(feats, ids);
      std::vector<std::size_t> all(window);
      for (std::size_t i = 0; i < window; ++i) all[i] = i;
      out.diversity = list_distance(all, s);
    }
    out.regret = round_regret(log);
    return out;
  }

 private:
  const World* world_;
  SimulationOptions opts_;
  long long t_ = 0;
  std::size_t updates_ = 0;
  InteractionBatch pending_;
};

/// Feedback from `n_rounds` of uniformly random rankings over the initial
/// catalog: one batch per `batch_size` rounds plus the remainder.
inline std::vector<InteractionBatch> warm_feedback(const World& world, std::size_t n_rounds) {
  SimulationOptions opts;
  opts.theta = 1.0;
  opts.warm = true;
  Simulation sim(world, opts);
  RandomPolicy logger;
  std::vector<InteractionBatch> batches;
  for (std::size_t i = 0; i < n_rounds; ++i) {
    auto out = sim.step(logger);
    if (out.batch) batches.push_back(std::move(*out.batch));
  }
  if (auto rest = sim.flush(); !rest.empty()) batches.push_back(std::move(rest));
  return batches;
}

inline BanditState warm_start(const World& world, std::size_t n_rounds, double alpha,
                              double gamma) {
  BanditState state = BanditState::fresh(world.layout.z(), alpha, gamma);
  for (const auto& b : warm_feedback(world, n_rounds)) state = update_batch(state, b);
  return state;
}

struct RunTrace {
  std::vector<RoundLog> logs;
  std::vector<double> ndcg;  // rounds where defined
  std::vector<double> ilad;  // per round, mean pairwise distance in the window
  std::vector<double> ilmd;
  std::vector<double> regret;  // cumulative
  std::size_t dpp_prefix_total = 0;
  std::size_t updates = 0;
  std::size_t clicks = 0;
  std::size_t impressions = 0;
};

using RoundObserver = std::function<void(const StepOutcome&)>;

/// Runs `rounds` steps, applying each emitted batch to `policy`.
inline RunTrace run_rounds(const World& world, Policy& policy, const SimulationOptions& opts,
                           std::size_t rounds, const RoundObserver& observer = {}) {
  Simulation sim(world, opts);
  RunTrace trace;
  trace.logs.reserve(rounds);
  double cumulative = 0.0;
  for (std::size_t i = 0; i < rounds; ++i) {
    StepOutcome out = sim.step(policy);
    if (observer) observer(out);
    if (out.batch) policy.update(*out.batch);
    if (out.ndcg) trace.ndcg.push_back(*out.ndcg);
    if (out.diversity) {
      trace.ilad.push_back(out.diversity->mean);
      trace.ilmd.push_back(out.diversity->min);
    }
    cumulative += out.regret;
    trace.regret.push_back(cumulative);
    trace.dpp_prefix_total += out.slate.dpp_prefix_len;
    trace.clicks += out.log.clicks.size();
    trace.impressions += out.log.impressed;
    trace.logs.push_back(std::move(out.log));
  }
  trace.updates = sim.updates_emitted();
  return trace;
}

}  // namespace slaterank
