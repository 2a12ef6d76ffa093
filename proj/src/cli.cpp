#include "hnav/cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <numeric>

#include "CLI11.hpp"
#include "hnav/bench.hpp"
#include "hnav/config.hpp"
#include "hnav/gradcheck.hpp"
#include "json.hpp"

namespace hnav {

namespace fs = std::filesystem;

namespace {

// Thrown for invalid option values that CLI11 cannot check itself.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config_path;
  std::string out_dir = "runs";
  std::uint64_t seed = 0;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_path, "Config file (key = value with [sections])")->check(CLI::ExistingFile);
  sub->add_option("--out", c.out_dir, "Output directory")->capture_default_str();
  sub->add_option("--seed", c.seed, "Base seed")->capture_default_str();
}

ConfigFile config_file(const Common& c) {
  return c.config_path.empty() ? ConfigFile{} : ConfigFile::load(c.config_path);
}

RunConfig run_config(const Common& c, const std::string& scenario) {
  RunConfig base;
  try {
    base.sim = scenario_preset(scenario);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return apply_config(config_file(c), base);
}

fs::path out_dir(const Common& c) {
  fs::create_directories(c.out_dir);
  return fs::path(c.out_dir);
}

std::shared_ptr<const CoopNetParams> load_coop(const std::string& path) {
  if (path.empty()) return nullptr;
  return std::make_shared<const CoopNetParams>(CoopNetParams::load(path));
}

std::shared_ptr<const PolicyParams> load_policy(const std::string& path) {
  if (path.empty()) return nullptr;
  return std::make_shared<const PolicyParams>(PolicyParams::load(path));
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

const std::vector<std::string> kScenarios = {"low", "mid", "high"};

// --- gen-data ---------------------------------------------------------------

struct GenDataArgs {
  Common common;
  std::vector<std::string> scenarios = kScenarios;
  int episodes = 20;
  int separable = 0;
};

int gen_data(const GenDataArgs& a, std::ostream& out) {
  std::vector<CoopSample> data;
  if (a.separable > 0) {
    data = generate_separable_dataset(a.separable, a.common.seed);
  } else {
    for (std::size_t s = 0; s < a.scenarios.size(); ++s) {
      const RunConfig rc = run_config(a.common, a.scenarios[s]);
      auto part = generate_dataset(rc.sim, a.episodes, a.common.seed + 1000003ULL * s, rc.nav.history_length);
      data.insert(data.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
  }
  const fs::path path = out_dir(a.common) / "coop_dataset.bin";
  write_dataset(path.string(), data);
  out << "wrote " << data.size() << " samples to " << path.string() << '\n';
  return kExitOk;
}

// --- train-coop -------------------------------------------------------------

struct TrainCoopArgs {
  Common common;
  std::string data;
  int separable = 0;
  double holdout = 0.2;
};

int train_coop_cmd(const TrainCoopArgs& a, std::ostream& out) {
  if (a.data.empty() == (a.separable == 0)) throw UsageError("train-coop: give exactly one of --data or --separable");
  if (!(a.holdout >= 0.0 && a.holdout < 1.0)) throw UsageError("train-coop: --holdout must be in [0, 1)");
  const RunConfig rc = apply_config(config_file(a.common));
  std::vector<CoopSample> data =
      a.separable > 0 ? generate_separable_dataset(a.separable, a.common.seed, rc.nav.history_length, rc.sim.dt)
                      : read_dataset(a.data);
  if (data.size() < 2) throw std::runtime_error("train-coop: dataset has fewer than 2 samples");

  Rng rng(a.common.seed ^ 0x5EEDC0FFEEULL);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
  const auto n_test = static_cast<std::size_t>(a.holdout * static_cast<double>(data.size()));
  std::vector<CoopSample> train, test;
  for (std::size_t i = 0; i < order.size(); ++i) (i < n_test ? test : train).push_back(std::move(data[order[i]]));

  CoopTrainConfig tc = rc.coop_train;
  tc.seed = a.common.seed;
  const auto start = std::chrono::steady_clock::now();
  const CoopTrainResult result = train_coop(train, tc, rc.coop_dims, [&](int epoch, double loss) {
    out << "epoch " << epoch << " loss " << loss << '\n';
  });
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const fs::path dir = out_dir(a.common);
  result.params.save((dir / "coop.bin").string());
  std::ofstream curve(dir / "coop_loss.csv");
  curve << "epoch,loss\n";
  for (std::size_t e = 0; e < result.loss_curve.size(); ++e) curve << e << ',' << result.loss_curve[e] << '\n';

  nlohmann::json report = {{"train_samples", train.size()}, {"test_samples", test.size()},
                           {"train_accuracy", coop_accuracy(train, result.params)},
                           {"test_accuracy", test.empty() ? nlohmann::json(nullptr)
                                                          : nlohmann::json(coop_accuracy(test, result.params))},
                           {"seconds", seconds}};
  write_text(dir / "coop_train.json", report.dump(2) + "\n");
  out << report.dump(2) << '\n';
  return kExitOk;
}

// --- train-policy -----------------------------------------------------------

struct TrainPolicyArgs {
  Common common;
  std::string coop;
  std::vector<std::string> scenarios = kScenarios;
  std::string env = "nav";
  bool no_coop = false;
  int updates = -1;
  int steps = -1;
};

int train_policy_cmd(const TrainPolicyArgs& a, std::ostream& out) {
  RunConfig rc = apply_config(config_file(a.common));
  PolicyTrainConfig tc = rc.policy_train;
  if (a.updates > 0) tc.updates = a.updates;
  if (a.steps > 0) tc.steps_per_update = a.steps;
  tc.seed = a.common.seed;

  std::unique_ptr<HorizonEnv> env;
  if (a.env == "horizon-only") {
    RewardCoeffs coeffs = rc.reward;
    env = std::make_unique<HorizonOnlyEnv>(coeffs);
  } else {
    if (!a.no_coop && a.coop.empty()) throw UsageError("train-policy: --coop is required unless --no-coop");
    std::vector<SimConfig> scenarios;
    for (const auto& s : a.scenarios) scenarios.push_back(run_config(a.common, s).sim);
    NavigatorConfig nav = rc.nav;
    nav.greedy_horizon = false;
    env = std::make_unique<NavEnv>(scenarios, a.no_coop ? nullptr : load_coop(a.coop), nav, rc.reward, a.no_coop);
  }

  std::vector<LearningCurveRow> curve;
  const PolicyParams params = train_policy(*env, tc, &curve, [&](const LearningCurveRow& r) {
    out << "update " << r.update << " return " << r.mean_return << " mean_h " << r.mean_horizon << '\n';
  });
  const fs::path dir = out_dir(a.common);
  params.save((dir / "policy.bin").string());
  write_learning_curve((dir / "learning_curve.csv").string(), curve);
  out << "wrote " << (dir / "policy.bin").string() << '\n';
  return kExitOk;
}

// --- eval -------------------------------------------------------------------

struct EvalArgs {
  Common common;
  std::string stack;
  std::string scenario = "mid";
  int episodes = 250;
  std::string coop, policy;
  bool logs = false;
  bool svg = false;
  bool mpc_debug = false;
};

PolicyStack make_stack(const std::string& name, const std::string& coop, const std::string& policy, int h_max) {
  PolicyStack stack;
  try {
    stack = PolicyStack::parse(name);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (stack.needs_coop() && coop.empty()) throw UsageError("stack " + name + " needs --coop");
  if (stack.needs_policy() && policy.empty()) throw UsageError("stack " + name + " needs --policy");
  if (stack.kind == StackKind::FixedHorizon && (stack.fixed_h < 1 || stack.fixed_h > h_max))
    throw UsageError("fixed horizon out of range 1.." + std::to_string(h_max));
  if (stack.needs_coop()) stack.coop = load_coop(coop);
  if (stack.needs_policy()) stack.policy = load_policy(policy);
  return stack;
}

int eval_cmd(const EvalArgs& a, std::ostream& out) {
  const RunConfig rc = run_config(a.common, a.scenario);
  const PolicyStack stack = make_stack(a.stack, a.coop, a.policy, rc.nav.h_max);
  const fs::path dir = out_dir(a.common);

  EpisodeOptions options;
  options.nav = rc.nav;
  options.reward = rc.reward;
  options.scenario = a.scenario;
  std::vector<EpisodeLog> logs;
  const MetricsSummary m = evaluate(rc.sim, stack, a.episodes, a.common.seed, options, &logs);
  write_episode_csv((dir / "episodes.csv").string(), m);
  write_summary_json((dir / "summary.json").string(), m);

  if (a.logs || a.svg) {
    fs::create_directories(dir / "logs");
    for (std::size_t i = 0; i < logs.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "episode_%04zu", i);
      if (a.logs) write_episode_log((dir / "logs" / (std::string(name) + ".jsonl")).string(), logs[i]);
      if (a.svg) write_text(dir / "logs" / (std::string(name) + ".svg"), render_trajectory(logs[i]));
    }
  }
  if (a.mpc_debug && stack.uses_mpc()) {
    // Re-runs the first episode with a dump per solve.
    const fs::path dbg = dir / "mpc_debug";
    fs::create_directories(dbg);
    EpisodeOptions o = options;
    int solve = 0;
    o.nav.on_solve = [&](const MpcProblem& p, const MpcSolution& s) {
      char name[32];
      std::snprintf(name, sizeof name, "solve_%04d.json", solve++);
      write_text(dbg / name, mpc_debug_json(p, s) + "\n");
    };
    run_episode(rc.sim, stack, a.common.seed, o);
  }
  out << summary_json(m) << '\n';
  return kExitOk;
}

// --- sweep ------------------------------------------------------------------

struct SweepArgs {
  Common common;
  std::vector<std::string> scenarios = kScenarios;
  std::vector<int> horizons;
  int episodes = 50;
  std::string coop;
};

int sweep_cmd(const SweepArgs& a, std::ostream& out) {
  if (a.coop.empty()) throw UsageError("sweep needs --coop");
  std::vector<std::pair<std::string, SimConfig>> scenarios;
  RunConfig rc;
  for (const auto& s : a.scenarios) {
    rc = run_config(a.common, s);
    scenarios.emplace_back(s, rc.sim);
  }
  std::vector<int> horizons = a.horizons;
  if (horizons.empty())
    for (int h = 1; h <= rc.nav.h_max; ++h) horizons.push_back(h);
  for (int h : horizons)
    if (h < 1 || h > rc.nav.h_max) throw UsageError("horizon out of range 1.." + std::to_string(rc.nav.h_max));

  EpisodeOptions options;
  options.nav = rc.nav;
  options.reward = rc.reward;
  const auto rows = fixed_horizon_sweep(scenarios, horizons, a.episodes, a.common.seed, load_coop(a.coop), options);
  const fs::path dir = out_dir(a.common);
  write_sweep_csv((dir / "sweep.csv").string(), rows);
  write_text(dir / "sweep.svg", render_sweep(rows));
  for (const auto& r : rows)
    out << r.scenario << " h=" << r.h << " SR " << r.metrics.SR << " CR " << r.metrics.CR << " OR " << r.metrics.OR
        << '\n';
  return kExitOk;
}

// --- replay -----------------------------------------------------------------

struct ReplayArgs {
  Common common;
  std::string log;
};

int replay_cmd(const ReplayArgs& a, std::ostream& out) {
  const EpisodeLog log = read_episode_log(a.log);
  const fs::path path = out_dir(a.common) / (fs::path(a.log).stem().string() + ".svg");
  write_text(path, render_trajectory(log));
  out << "wrote " << path.string() << '\n';
  return kExitOk;
}

// --- gradcheck --------------------------------------------------------------

int gradcheck_cmd(const Common& c, std::ostream& out) {
  nlohmann::json report = nlohmann::json::array();
  bool ok = true;
  for (const GradCheckReport& r : {coop_gradcheck(c.seed), ppo_gradcheck(c.seed)}) {
    nlohmann::json tensors = nlohmann::json::object();
    for (const auto& t : r.tensors) tensors[t.name] = t.rel_error;
    report.push_back({{"suite", r.suite}, {"max_rel_error", r.max_rel_error()}, {"passed", r.passed()},
                      {"tensors", tensors}});
    out << r.suite << ": max relative error " << r.max_rel_error() << (r.passed() ? " (pass)" : " (FAIL)") << '\n';
    ok = ok && r.passed();
  }
  write_text(out_dir(c) / "gradcheck.json", report.dump(2) + "\n");
  return ok ? kExitOk : kExitRuntime;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Optimal-horizon social navigation: simulation, training and benchmarks", "hnav"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a cooperation dataset");
  add_common(gen_cmd, gen.common);
  gen_cmd->add_option("--scenario", gen.scenarios, "Presets to sample (comma separated)")
      ->delimiter(',')
      ->check(CLI::IsMember(kScenarios));
  gen_cmd->add_option("--episodes", gen.episodes, "Episodes per preset")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--separable", gen.separable, "Synthetic separable set of this many samples instead")
      ->check(CLI::NonNegativeNumber);

  TrainCoopArgs tcoop;
  auto* tcoop_cmd = app.add_subcommand("train-coop", "Train the cooperation classifier");
  add_common(tcoop_cmd, tcoop.common);
  tcoop_cmd->add_option("--data", tcoop.data, "Dataset file from gen-data")->check(CLI::ExistingFile);
  tcoop_cmd->add_option("--separable", tcoop.separable, "Train on a synthetic separable set of this size")
      ->check(CLI::NonNegativeNumber);
  tcoop_cmd->add_option("--holdout", tcoop.holdout, "Held-out fraction")->capture_default_str();

  TrainPolicyArgs tpol;
  auto* tpol_cmd = app.add_subcommand("train-policy", "Train the horizon policy with PPO");
  add_common(tpol_cmd, tpol.common);
  tpol_cmd->add_option("--coop", tpol.coop, "Cooperation classifier parameters")->check(CLI::ExistingFile);
  tpol_cmd->add_option("--scenario", tpol.scenarios, "Training presets (comma separated)")
      ->delimiter(',')
      ->check(CLI::IsMember(kScenarios));
  tpol_cmd->add_option("--env", tpol.env, "nav or horizon-only")->check(CLI::IsMember({"nav", "horizon-only"}));
  tpol_cmd->add_flag("--no-coop", tpol.no_coop, "Train with every pedestrian labeled non-cooperative");
  tpol_cmd->add_option("--updates", tpol.updates, "PPO updates (overrides config)")->check(CLI::PositiveNumber);
  tpol_cmd->add_option("--steps", tpol.steps, "Steps per update (overrides config)")->check(CLI::PositiveNumber);

  EvalArgs ev;
  auto* ev_cmd = app.add_subcommand("eval", "Evaluate a navigation stack");
  add_common(ev_cmd, ev.common);
  ev_cmd->add_option("--stack", ev.stack, "full, fixed-<h>, nocoop, orca or sf")->required();
  ev_cmd->add_option("--scenario", ev.scenario, "low, mid or high")->check(CLI::IsMember(kScenarios));
  ev_cmd->add_option("--episodes", ev.episodes, "Number of episodes")->check(CLI::PositiveNumber)->capture_default_str();
  ev_cmd->add_option("--coop", ev.coop, "Cooperation classifier parameters")->check(CLI::ExistingFile);
  ev_cmd->add_option("--policy", ev.policy, "Horizon policy parameters")->check(CLI::ExistingFile);
  ev_cmd->add_flag("--logs", ev.logs, "Write one JSON-lines log per episode");
  ev_cmd->add_flag("--svg", ev.svg, "Render every episode as SVG");
  ev_cmd->add_flag("--mpc-debug", ev.mpc_debug, "Dump every MPC solve of the first episode as JSON");

  SweepArgs sw;
  auto* sw_cmd = app.add_subcommand("sweep", "Success rate under fixed prediction horizons");
  add_common(sw_cmd, sw.common);
  sw_cmd->add_option("--scenario", sw.scenarios, "Presets (comma separated)")
      ->delimiter(',')
      ->check(CLI::IsMember(kScenarios));
  sw_cmd->add_option("--horizons", sw.horizons, "Horizons (comma separated, default 1..h_max)")->delimiter(',');
  sw_cmd->add_option("--episodes", sw.episodes, "Episodes per cell")->check(CLI::PositiveNumber)->capture_default_str();
  sw_cmd->add_option("--coop", sw.coop, "Cooperation classifier parameters")->check(CLI::ExistingFile);

  ReplayArgs rp;
  auto* rp_cmd = app.add_subcommand("replay", "Render an episode log as SVG");
  rp_cmd->add_option("--log", rp.log, "Episode log (JSON lines)")->required();
  rp_cmd->add_option("--out", rp.common.out_dir, "Output directory")->capture_default_str();

  Common gc;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient suites");
  gc_cmd->add_option("--seed", gc.seed, "Seed")->capture_default_str();
  gc_cmd->add_option("--out", gc.out_dir, "Output directory")->capture_default_str();

  std::vector<std::string> argv_store = {"hnav"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : argv_store) argv.push_back(s.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return kExitUsage;
  }

  try {
    if (*gen_cmd) return gen_data(gen, out);
    if (*tcoop_cmd) return train_coop_cmd(tcoop, out);
    if (*tpol_cmd) return train_policy_cmd(tpol, out);
    if (*ev_cmd) return eval_cmd(ev, out);
    if (*sw_cmd) return sweep_cmd(sw, out);
    if (*rp_cmd) return replay_cmd(rp, out);
    if (*gc_cmd) return gradcheck_cmd(gc, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace hnav
