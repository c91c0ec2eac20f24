// slaterank: experiment runner for the two-stage slate ranker.
//
//   slaterank [--seed N] [--jobs N] run    --config FILE --out DIR [--log-rounds]
//   slaterank [--seed N] [--jobs N] sweep  --axis theta|alpha --config FILE --out DIR
//   slaterank [--seed N]            replay --log FILE --config FILE --out DIR
//
// Exit codes: 0 success, 2 configuration error, 3 data or schema error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "slaterank/experiment.hpp"
#include "slaterank/replay.hpp"

namespace fs = std::filesystem;
using namespace slaterank;

namespace {

constexpr int kConfigExit = 2;
constexpr int kDataExit = 3;

struct Globals {
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
};

ExperimentSpec load(const std::string& path, const Globals& g) {
  ExperimentSpec spec = load_spec(path);
  if (g.seed) spec.seeds = {*g.seed};
  return spec;
}

void report(const fs::path& dir, const std::vector<PointResult>& results, std::size_t n_seeds) {
  std::cout << "wrote " << results.size() << " runs (" << results.size() / n_seeds
            << " points x " << n_seeds << " seeds) to " << dir.string() << '\n';
}

int cmd_run(const std::string& config, const std::string& out, bool log_rounds, const Globals& g) {
  const ExperimentSpec spec = load(config, g);
  const auto points = single_point(spec);
  std::vector<PointResult> results;
  if (log_rounds) {
    fs::create_directories(out);
    for (auto seed : spec.seeds) {
      std::ofstream log(fs::path(out) / ("rounds_seed" + std::to_string(seed) + ".jsonl"),
                        std::ios::binary);
      if (!log) throw Error("cannot write round log in " + out);
      results.push_back(run_point(spec, points[0], seed,
                                  [&](const StepOutcome& o) { write_round_log(log, o.log); }));
    }
  } else {
    results = run_grid(spec, points, g.jobs);
  }
  write_outputs(out, spec, results);
  report(out, results, spec.seeds.size());
  return 0;
}

int cmd_sweep(const std::string& axis, const std::string& config, const std::string& out,
              const Globals& g) {
  const ExperimentSpec spec = load(config, g);
  std::vector<RunPoint> points;
  if (axis == "theta") {
    if (spec.sweep_theta.empty()) throw ConfigError("sweep.theta", "must not be empty");
    points = theta_axis(spec);
  } else {
    if (spec.sweep_alpha.empty()) throw ConfigError("sweep.alpha", "must not be empty");
    if (spec.sweep_policies.empty()) throw ConfigError("sweep.policies", "must not be empty");
    points = alpha_axis(spec);
  }
  const auto results = run_grid(spec, points, g.jobs);
  write_outputs(out, spec, results);
  report(out, results, spec.seeds.size());
  return 0;
}

std::unique_ptr<Policy> replay_policy(const ExperimentSpec& spec, std::size_t z) {
  switch (spec.policy) {
    case PolicyKind::random:
      return std::make_unique<RandomPolicy>();
    case PolicyKind::popularity:
      return std::make_unique<PopularityPolicy>();
    default:
      break;
  }
  const BanditKind kind = spec.policy == PolicyKind::ucb ? BanditKind::ucb : BanditKind::ts;
  if (spec.initial_state.empty())
    return std::make_unique<BanditPolicy>(kind, BanditState::fresh(z, spec.alpha, spec.gamma));
  std::ifstream in(spec.initial_state);
  if (!in) throw ConfigError("initial_state", "cannot open " + spec.initial_state);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(0, std::string("initial_state: ") + e.what());
  }
  const BanditState s = bandit_state_from_json(j);
  if (s.z() != z) throw ConfigError("initial_state", "snapshot dimension does not match the data");
  return std::make_unique<BanditPolicy>(
      kind, BanditState(s.design(), s.response(), spec.alpha, spec.gamma, s.round()));
}

template <typename T>
T read_with(const std::string& path, T (*reader)(std::istream&)) {
  std::ifstream in(path);
  if (!in) throw SchemaError(0, "cannot open " + path);
  return reader(in);
}

int cmd_replay(const std::string& log_path, const std::string& config, const std::string& out,
               const Globals& g) {
  const ExperimentSpec spec = load(config, g);
  std::ifstream in(log_path);
  if (!in) throw SchemaError(0, "cannot open " + log_path);
  const auto logs = read_round_logs(in);

  std::optional<World> world;
  std::unique_ptr<ContextSource> src;
  if (spec.data) {
    src = std::make_unique<FileContextSource>(read_with(spec.data->users, read_embeddings),
                                              read_with(spec.data->widgets, read_embeddings),
                                              read_with(spec.data->interactions, read_interactions),
                                              spec.data->svd_rank);
  } else {
    EnvConfig env = spec.env;
    env.seed = spec.seeds.front();
    world = generate_world(env);
    src = std::make_unique<WorldContextSource>(*world, static_cast<long long>(spec.warm_rounds),
                                               spec.dpp_features);
  }

  auto policy = replay_policy(spec, src->z());
  ReplayOptions opts;
  opts.theta = spec.theta;
  opts.slots = spec.env.slots;
  opts.window = spec.eval_window;
  opts.batch_size = spec.env.batch_size;
  opts.train_fraction = spec.train_fraction;
  opts.seed = spec.seeds.front();
  const ReplayReport r = replay_eval(logs, *src, *policy, opts);

  const RunPoint p{spec.policy, spec.alpha, spec.gamma, spec.theta};
  std::ostringstream csv;
  csv << "run_id,policy,alpha,gamma,theta,ndcg,ilad,ilmd,ctr,final_regret,train_rounds,"
         "holdout_rounds,ndcg_lists,skipped_without_clicks,diversity_excluded,"
         "holdout_without_clicks\n";
  const double final_regret = r.cumulative_regret.empty() ? std::nan("") : r.cumulative_regret.back();
  csv << run_id(p) << ',' << to_string(p.policy) << ',' << format_real(p.alpha) << ','
      << format_real(p.gamma) << ',' << format_real(p.theta) << ',' << format_real(r.ndcg) << ','
      << format_real(r.ilad) << ',' << format_real(r.ilmd) << ',' << format_real(r.ctr) << ','
      << format_real(final_regret) << ',' << r.train_rounds << ',' << r.holdout_rounds << ','
      << r.ndcg_lists << ',' << r.skipped_without_clicks << ',' << r.diversity_excluded << ','
      << (r.holdout_without_clicks ? 1 : 0) << '\n';

  std::ostringstream regret;
  regret << "run_id,seed,t,cumulative_regret\n";
  for (std::size_t i = 0; i < r.cumulative_regret.size(); ++i)
    regret << run_id(p) << ',' << opts.seed << ',' << logs[r.train_rounds + i].t << ','
           << format_real(r.cumulative_regret[i]) << '\n';

  fs::create_directories(out);
  write_text(fs::path(out) / "results.csv", csv.str());
  write_text(fs::path(out) / "regret_curve.csv", regret.str());
  write_text(fs::path(out) / "resolved_config.json", to_json(spec).dump(2) + "\n");
  if (r.holdout_without_clicks) std::cerr << "warning: no clicks in the held-out rounds\n";
  std::cout << "replayed " << r.holdout_rounds << " held-out rounds to " << out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage slate ranker: linear bandits with DPP diversification"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Run a single seed instead of the config's list");
  app.add_option("--jobs", g.jobs, "Parallel workers for grid points and seeds")
      ->check(CLI::PositiveNumber);

  std::string config, out, axis, log_path;
  bool log_rounds = false;

  auto* run = app.add_subcommand("run", "Single configuration over every seed");
  run->add_option("--config", config, "Experiment config (JSON)")->required();
  run->add_option("--out", out, "Output directory")->required();
  run->add_flag("--log-rounds", log_rounds, "Also write rounds_seed<k>.jsonl round logs");

  auto* sweep = app.add_subcommand("sweep", "Grid over one axis");
  sweep->add_option("--axis", axis, "theta or alpha")
      ->required()
      ->check(CLI::IsMember({"theta", "alpha"}));
  sweep->add_option("--config", config, "Experiment config (JSON)")->required();
  sweep->add_option("--out", out, "Output directory")->required();

  auto* replay = app.add_subcommand("replay", "Offline evaluation on a round log");
  replay->add_option("--log", log_path, "Round log (JSON lines)")->required();
  replay->add_option("--config", config, "Experiment config (JSON)")->required();
  replay->add_option("--out", out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigExit;
  }
  if (*seed_opt) g.seed = seed;

  try {
    if (*run) return cmd_run(config, out, log_rounds, g);
    if (*sweep) return cmd_sweep(axis, config, out, g);
    return cmd_replay(log_path, config, out, g);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigExit;
  } catch (const SchemaError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataExit;
  } catch (const UnknownWidget& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataExit;
  } catch (const MissingTruth& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataExit;
  } catch (const DimensionMismatch& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataExit;
  } catch (const EmptyHoldout& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
