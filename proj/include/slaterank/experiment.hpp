#pragma once

// Experiment specs, grid execution over (config point × seed) and the CSV
// emitters behind the command-line runner.

#include <atomic>
#include <cmath>
#include <exception>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

#include "json.hpp"
#include "slaterank/bandit.hpp"
#include "slaterank/errors.hpp"
#include "slaterank/metrics.hpp"
#include "slaterank/ranker.hpp"
#include "slaterank/replay.hpp"
#include "slaterank/simenv.hpp"

namespace slaterank {

struct DataFiles {
  std::string users;
  std::string widgets;
  std::string interactions;
  std::size_t svd_rank = 1;
};

struct ExperimentSpec {
  EnvConfig env;
  PolicyKind policy = PolicyKind::ucb;
  double alpha = 0.05;
  double gamma = 1.0;
  double theta = 0.7;
  std::size_t warm_rounds = 0;
  std::vector<std::uint64_t> seeds{1};
  std::size_t eval_window = 10;
  DppFeatureSpace dpp_features = DppFeatureSpace::widget;
  std::size_t regret_stride = 100;
  std::string initial_state;  // bandit snapshot; replaces warm start when set

  std::vector<double> sweep_alpha{0.01, 0.05, 0.25};
  std::vector<double> sweep_theta{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<PolicyKind> sweep_policies{PolicyKind::ucb, PolicyKind::ts};

  double train_fraction = 0.5;
  std::optional<DataFiles> data;

  void validate() const {
    env.validate();
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha", "must be >= 0");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma", "must be in [0, 1]");
    if (!(theta >= 0.0 && theta <= 1.0)) throw ConfigError("theta", "must be in [0, 1]");
    if (seeds.empty()) throw ConfigError("seeds", "must not be empty");
    if (eval_window == 0) throw ConfigError("eval_window", "must be >= 1");
    if (regret_stride == 0) throw ConfigError("regret_stride", "must be >= 1");
    for (double a : sweep_alpha)
      if (!(a >= 0.0) || !std::isfinite(a)) throw ConfigError("sweep.alpha", "values must be >= 0");
    for (double t : sweep_theta)
      if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("sweep.theta", "values must be in [0, 1]");
    if (!(train_fraction >= 0.0 && train_fraction < 1.0))
      throw ConfigError("replay.train_fraction", "must be in [0, 1)");
  }
};

// ---------------------------------------------------------------------------
// Config (JSON)

inline PolicyKind parse_policy(const std::string& s, const std::string& field) {
  if (s == "ucb" || s == "linucb") return PolicyKind::ucb;
  if (s == "ts" || s == "lints") return PolicyKind::ts;
  if (s == "random") return PolicyKind::random;
  if (s == "popularity") return PolicyKind::popularity;
  throw ConfigError(field, "unknown policy '" + s + "' (ucb, ts, random, popularity)");
}

namespace detail {

class ConfigReader {
 public:
  ConfigReader(const nlohmann::json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) throw ConfigError(prefix_.empty() ? "<root>" : prefix_, "expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_unsigned_v<T>) {
        if (!it->is_number_integer() || it->template get<long long>() < 0)
          throw ConfigError(name(key), "must be a non-negative integer");
      }
      out = it->template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(name(key), "has the wrong type");
    }
  }

  const nlohmann::json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string name(const char* key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

  void reject_unknown() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(name(it.key().c_str()), "unknown field");
  }

 private:
  const nlohmann::json& j_;
  std::string prefix_;
  std::set<std::string> seen_;
};

}  // namespace detail

/// Every field is optional; missing ones keep their defaults.
inline ExperimentSpec parse_spec(const nlohmann::json& j) {
  ExperimentSpec s;
  detail::ConfigReader r(j, "");
  if (const auto* env = r.child("env")) {
    detail::ConfigReader e(*env, "env");
    auto& c = s.env;
    e.get("n_users", c.n_users);
    e.get("n_widgets", c.n_widgets);
    e.get("slots", c.slots);
    e.get("user_dim", c.user_dim);
    e.get("widget_dim", c.widget_dim);
    e.get("svd_rank", c.svd_rank);
    e.get("revenue_dim", c.revenue_dim);
    e.get("n_clusters", c.n_clusters);
    e.get("cluster_spread", c.cluster_spread);
    e.get("base_logit", c.base_logit);
    e.get("signal", c.signal);
    e.get("noise", c.noise);
    e.get("interaction_rate", c.interaction_rate);
    e.get("batch_size", c.batch_size);
    e.get("arrival_rate", c.arrival_rate);
    e.get("removal_rate", c.removal_rate);
    e.get("scroll_continue", c.scroll_continue);
    e.get("horizon", c.horizon);
    e.get("minutes_per_round", c.minutes_per_round);
    e.get("start_day_of_year", c.start_day_of_year);
    e.reject_unknown();
  }
  std::string policy = to_string(s.policy);
  r.get("policy", policy);
  s.policy = parse_policy(policy, "policy");
  r.get("alpha", s.alpha);
  r.get("gamma", s.gamma);
  r.get("theta", s.theta);
  r.get("warm_rounds", s.warm_rounds);
  r.get("seeds", s.seeds);
  r.get("eval_window", s.eval_window);
  r.get("regret_stride", s.regret_stride);
  r.get("initial_state", s.initial_state);
  std::string dpp = s.dpp_features == DppFeatureSpace::widget ? "widget" : "context";
  r.get("dpp_features", dpp);
  if (dpp == "widget") {
    s.dpp_features = DppFeatureSpace::widget;
  } else if (dpp == "context") {
    s.dpp_features = DppFeatureSpace::context;
  } else {
    throw ConfigError("dpp_features", "must be 'widget' or 'context'");
  }
  if (const auto* sweep = r.child("sweep")) {
    detail::ConfigReader w(*sweep, "sweep");
    w.get("alpha", s.sweep_alpha);
    w.get("theta", s.sweep_theta);
    std::vector<std::string> policies;
    for (auto p : s.sweep_policies) policies.push_back(to_string(p));
    w.get("policies", policies);
    s.sweep_policies.clear();
    for (const auto& p : policies) s.sweep_policies.push_back(parse_policy(p, "sweep.policies"));
    w.reject_unknown();
  }
  if (const auto* replay = r.child("replay")) {
    detail::ConfigReader w(*replay, "replay");
    w.get("train_fraction", s.train_fraction);
    w.reject_unknown();
  }
  if (const auto* data = r.child("data")) {
    detail::ConfigReader w(*data, "data");
    DataFiles d;
    w.get("users", d.users);
    w.get("widgets", d.widgets);
    w.get("interactions", d.interactions);
    w.get("svd_rank", d.svd_rank);
    w.reject_unknown();
    if (d.users.empty() || d.widgets.empty() || d.interactions.empty())
      throw ConfigError("data", "users, widgets and interactions are all required");
    s.data = d;
  }
  r.reject_unknown();
  s.validate();
  return s;
}

inline nlohmann::json to_json(const ExperimentSpec& s) {
  const auto& c = s.env;
  nlohmann::json env = {{"n_users", c.n_users},
                        {"n_widgets", c.n_widgets},
                        {"slots", c.slots},
                        {"user_dim", c.user_dim},
                        {"widget_dim", c.widget_dim},
                        {"svd_rank", c.svd_rank},
                        {"revenue_dim", c.revenue_dim},
                        {"n_clusters", c.n_clusters},
                        {"cluster_spread", c.cluster_spread},
                        {"base_logit", c.base_logit},
                        {"signal", c.signal},
                        {"noise", c.noise},
                        {"interaction_rate", c.interaction_rate},
                        {"batch_size", c.batch_size},
                        {"arrival_rate", c.arrival_rate},
                        {"removal_rate", c.removal_rate},
                        {"scroll_continue", c.scroll_continue},
                        {"horizon", c.horizon},
                        {"minutes_per_round", c.minutes_per_round},
                        {"start_day_of_year", c.start_day_of_year}};
  std::vector<std::string> policies;
  for (auto p : s.sweep_policies) policies.push_back(to_string(p));
  nlohmann::json j = {{"env", env},
                      {"policy", to_string(s.policy)},
                      {"alpha", s.alpha},
                      {"gamma", s.gamma},
                      {"theta", s.theta},
                      {"warm_rounds", s.warm_rounds},
                      {"seeds", s.seeds},
                      {"eval_window", s.eval_window},
                      {"regret_stride", s.regret_stride},
                      {"initial_state", s.initial_state},
                      {"dpp_features", s.dpp_features == DppFeatureSpace::widget ? "widget" : "context"},
                      {"sweep", {{"alpha", s.sweep_alpha}, {"theta", s.sweep_theta}, {"policies", policies}}},
                      {"replay", {{"train_fraction", s.train_fraction}}}};
  if (s.data) {
    j["data"] = {{"users", s.data->users},
                 {"widgets", s.data->widgets},
                 {"interactions", s.data->interactions},
                 {"svd_rank", s.data->svd_rank}};
  }
  return j;
}

inline ExperimentSpec load_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("--config", std::string("invalid JSON: ") + e.what());
  }
  return parse_spec(j);
}

// ---------------------------------------------------------------------------
// Execution

struct RunPoint {
  PolicyKind policy = PolicyKind::ucb;
  double alpha = 0.05;
  double gamma = 1.0;
  double theta = 0.7;
};

inline std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string run_id(const RunPoint& p) {
  return to_string(p.policy) + "_a" + format_real(p.alpha) + "_g" + format_real(p.gamma) + "_t" +
         format_real(p.theta);
}

struct PointResult {
  RunPoint point;
  std::uint64_t seed = 0;
  double ndcg = 0.0;
  double ilad = 0.0;
  double ilmd = 0.0;
  double ctr = 0.0;
  double final_regret = 0.0;
  std::size_t clicks = 0;
  std::size_t rounds = 0;
  std::size_t updates = 0;
  double dpp_prefix_len = 0.0;  // mean over rounds
  std::vector<double> regret;   // cumulative, every round
  std::optional<BanditState> final_state;
};

inline std::unique_ptr<Policy> make_policy(const ExperimentSpec& spec, const RunPoint& p,
                                           const World& world) {
  switch (p.policy) {
    case PolicyKind::ucb:
    case PolicyKind::ts: {
      const BanditKind kind = p.policy == PolicyKind::ucb ? BanditKind::ucb : BanditKind::ts;
      if (!spec.initial_state.empty()) {
        std::ifstream in(spec.initial_state);
        if (!in) throw ConfigError("initial_state", "cannot open " + spec.initial_state);
        nlohmann::json j;
        try {
          j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
          throw SchemaError(0, std::string("initial_state: ") + e.what());
        }
        BanditState loaded = bandit_state_from_json(j);
        if (loaded.z() != world.layout.z())
          throw ConfigError("initial_state", "snapshot dimension does not match the environment");
        return std::make_unique<BanditPolicy>(
            kind, BanditState(loaded.design(), loaded.response(), p.alpha, p.gamma, loaded.round()));
      }
      return std::make_unique<BanditPolicy>(kind,
                                            warm_start(world, spec.warm_rounds, p.alpha, p.gamma));
    }
    case PolicyKind::random:
      return std::make_unique<RandomPolicy>();
    case PolicyKind::popularity: {
      auto pop = std::make_unique<PopularityPolicy>();
      for (const auto& b : warm_feedback(world, spec.warm_rounds)) pop->update(b);
      return pop;
    }
  }
  throw ConfigError("policy", "unsupported policy");
}

/// One full run: warm start, then env.horizon rounds with batched updates.
inline PointResult run_point(const ExperimentSpec& spec, const RunPoint& p, std::uint64_t seed,
                             const RoundObserver& observer = {}) {
  EnvConfig env = spec.env;
  env.seed = seed;
  const World world = generate_world(env);
  auto policy = make_policy(spec, p, world);

  SimulationOptions opts;
  opts.theta = p.theta;
  opts.eval_window = spec.eval_window;
  opts.dpp_features = spec.dpp_features;
  opts.clock_offset = static_cast<long long>(spec.warm_rounds);
  RunTrace trace = run_rounds(world, *policy, opts, env.horizon, observer);

  PointResult r;
  r.point = p;
  r.seed = seed;
  r.ndcg = mean(trace.ndcg);
  r.ilad = mean(trace.ilad);
  r.ilmd = mean(trace.ilmd);
  r.ctr = trace.impressions ? double(trace.clicks) / double(trace.impressions) : 0.0;
  r.final_regret = trace.regret.empty() ? 0.0 : trace.regret.back();
  r.clicks = trace.clicks;
  r.rounds = trace.logs.size();
  r.updates = trace.updates;
  r.dpp_prefix_len = r.rounds ? double(trace.dpp_prefix_total) / double(r.rounds) : 0.0;
  r.regret = std::move(trace.regret);
  if (const auto* bp = dynamic_cast<const BanditPolicy*>(policy.get())) r.final_state = bp->state();
  return r;
}

/// Runs every (point, seed) pair; results are ordered point-major regardless
/// of `jobs`. The observer may be called concurrently when jobs > 1.
inline std::vector<PointResult> run_grid(const ExperimentSpec& spec,
                                         const std::vector<RunPoint>& points, std::size_t jobs = 1,
                                         const RoundObserver& observer = {}) {
  const std::size_t n = points.size() * spec.seeds.size();
  std::vector<std::optional<PointResult>> slots(n);
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;

  auto worker = [&]() {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        slots[i] = run_point(spec, points[i / spec.seeds.size()],
                             spec.seeds[i % spec.seeds.size()], observer);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t j = 0; j < jobs; ++j) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (error) std::rethrow_exception(error);

  std::vector<PointResult> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

inline std::vector<RunPoint> single_point(const ExperimentSpec& s) {
  return {{s.policy, s.alpha, s.gamma, s.theta}};
}

inline std::vector<RunPoint> theta_axis(const ExperimentSpec& s) {
  std::vector<RunPoint> out;
  for (double t : s.sweep_theta) out.push_back({s.policy, s.alpha, s.gamma, t});
  return out;
}

inline std::vector<RunPoint> alpha_axis(const ExperimentSpec& s) {
  std::vector<RunPoint> out;
  for (auto p : s.sweep_policies)
    for (double a : s.sweep_alpha) out.push_back({p, a, s.gamma, s.theta});
  return out;
}

// ---------------------------------------------------------------------------
// Output

inline constexpr const char* kResultsHeader =
    "run_id,policy,alpha,gamma,theta,ndcg,ilad,ilmd,ctr,final_regret,seed,aggregate,clicks,"
    "dpp_prefix_len,ndcg_se,ilad_se,ilmd_se,ctr_se,final_regret_se";

/// One row per (point, seed) followed by one aggregate (mean ± standard
/// error) row per point. `results` must be point-major as from run_grid.
inline std::string results_csv(const std::vector<PointResult>& results, std::size_t n_seeds) {
  std::ostringstream out;
  out << kResultsHeader << '\n';
  auto prefix = [&](const RunPoint& p) {
    out << run_id(p) << ',' << to_string(p.policy) << ',' << format_real(p.alpha) << ','
        << format_real(p.gamma) << ',' << format_real(p.theta) << ',';
  };
  for (std::size_t start = 0; start + n_seeds <= results.size(); start += n_seeds) {
    std::vector<double> nd, il, im, ct, rg, ck, dp;
    for (std::size_t i = start; i < start + n_seeds; ++i) {
      const auto& r = results[i];
      prefix(r.point);
      out << format_real(r.ndcg) << ',' << format_real(r.ilad) << ',' << format_real(r.ilmd) << ','
          << format_real(r.ctr) << ',' << format_real(r.final_regret) << ',' << r.seed << ",0,"
          << r.clicks << ',' << format_real(r.dpp_prefix_len) << ",,,,,\n";
      nd.push_back(r.ndcg);
      il.push_back(r.ilad);
      im.push_back(r.ilmd);
      ct.push_back(r.ctr);
      rg.push_back(r.final_regret);
      ck.push_back(double(r.clicks));
      dp.push_back(r.dpp_prefix_len);
    }
    prefix(results[start].point);
    out << format_real(mean(nd)) << ',' << format_real(mean(il)) << ',' << format_real(mean(im))
        << ',' << format_real(mean(ct)) << ',' << format_real(mean(rg)) << ",,1,"
        << format_real(mean(ck)) << ',' << format_real(mean(dp)) << ','
        << format_real(standard_error(nd)) << ',' << format_real(standard_error(il)) << ','
        << format_real(standard_error(im)) << ',' << format_real(standard_error(ct)) << ','
        << format_real(standard_error(rg)) << '\n';
  }
  return out.str();
}

/// Cumulative regret every `stride` rounds and at the final round.
inline std::string regret_csv(const std::vector<PointResult>& results, std::size_t stride) {
  std::ostringstream out;
  out << "run_id,seed,t,cumulative_regret\n";
  for (const auto& r : results) {
    for (std::size_t t = 1; t <= r.regret.size(); ++t) {
      if (t % stride != 0 && t != r.regret.size()) continue;
      out << run_id(r.point) << ',' << r.seed << ',' << t << ',' << format_real(r.regret[t - 1])
          << '\n';
    }
  }
  return out.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

/// results.csv, regret_curve.csv, resolved_config.json and bandit snapshots.
inline void write_outputs(const std::filesystem::path& dir, const ExperimentSpec& spec,
                          const std::vector<PointResult>& results) {
  std::filesystem::create_directories(dir);
  write_text(dir / "results.csv", results_csv(results, spec.seeds.size()));
  write_text(dir / "regret_curve.csv", regret_csv(results, spec.regret_stride));
  write_text(dir / "resolved_config.json", to_json(spec).dump(2) + "\n");
  for (const auto& r : results) {
    if (!r.final_state) continue;
    std::filesystem::create_directories(dir / "states");
    write_text(dir / "states" / (run_id(r.point) + "_seed" + std::to_string(r.seed) + ".json"),
               to_json(*r.final_state).dump() + "\n");
  }
}

}  // namespace slaterank
