#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "hnav/bench.hpp"
#include "hnav/cli.hpp"
#include "hnav/config.hpp"
#include "json.hpp"

using namespace hnav;
namespace fs = std::filesystem;

namespace {

EpisodeLog synthetic_log(Outcome outcome, double duration, double length, int steps, int intruding) {
  EpisodeLog log;
  log.outcome = outcome;
  log.duration = duration;
  log.path_length = length;
  for (int k = 0; k < steps; ++k) {
    StepRecord s;
    s.step = k;
    s.intrusion = k < intruding;
    log.steps.push_back(s);
  }
  return log;
}

// Tag balance, quoted attributes and escaped ampersands: enough to reject
// anything an XML parser would.
bool well_formed_xml(const std::string& doc) {
  std::vector<std::string> open;
  std::size_t i = 0;
  bool root_seen = false;
  while (i < doc.size()) {
    if (doc[i] == '&') {
      const auto semi = doc.find(';', i);
      if (semi == std::string::npos || semi - i > 8) return false;
      i = semi + 1;
      continue;
    }
    if (doc[i] != '<') {
      ++i;
      continue;
    }
    if (doc.compare(i, 2, "<?") == 0) {
      const auto end = doc.find("?>", i);
      if (end == std::string::npos) return false;
      i = end + 2;
      continue;
    }
    const auto end = doc.find('>', i);
    if (end == std::string::npos) return false;
    std::string tag = doc.substr(i + 1, end - i - 1);
    i = end + 1;
    if (std::count(tag.begin(), tag.end(), '"') % 2 != 0) return false;
    if (!tag.empty() && tag.front() == '/') {
      const std::string name = tag.substr(1);
      if (open.empty() || open.back() != name) return false;
      open.pop_back();
      continue;
    }
    const bool self_closing = !tag.empty() && tag.back() == '/';
    const std::string name = tag.substr(0, tag.find_first_of(" \t\n/"));
    if (name.empty()) return false;
    if (open.empty()) {
      if (root_seen) return false;
      root_seen = true;
    }
    if (!self_closing) open.push_back(name);
  }
  return root_seen && open.empty();
}

std::size_t count_of(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hnav_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

SimConfig empty_arena() {
  SimConfig c = scenario_preset("low");
  c.n_cooperative = 0;
  c.n_noncooperative = 0;
  return c;
}

PolicyStack untrained_full() {
  Rng rng(3);
  PolicyStack s = PolicyStack::parse("full");
  s.coop = std::make_shared<const CoopNetParams>(CoopNetParams::init({}, &rng));
  s.policy = std::make_shared<const PolicyParams>(PolicyParams::init(16, 10, &rng));
  return s;
}

int cli(const std::vector<std::string>& args, std::string* err_text = nullptr) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  if (err_text) *err_text = err.str();
  return code;
}

}  // namespace

TEST_CASE("metric goldens: one success and one collision") {
  const std::vector<EpisodeLog> logs = {synthetic_log(Outcome::Success, 10.0, 12.0, 40, 0),
                                        synthetic_log(Outcome::Collision, 3.0, 2.5, 12, 0)};
  const MetricsSummary m = summarize(logs);
  CHECK(m.SR == 50.0);
  CHECK(m.CR == 50.0);
  CHECK(m.OR == 0.0);
  CHECK(m.ANT == 10.0);
  CHECK(m.ATL == 12.0);
  CHECK(m.n_episodes == 2);
}

TEST_CASE("intrusion ratio counts flagged steps") {
  CHECK(intrusion_ratio(synthetic_log(Outcome::Success, 10.0, 10.0, 40, 3)) == doctest::Approx(7.5).epsilon(1e-12));
  CHECK(intrusion_ratio(EpisodeLog{}) == 0.0);
  const MetricsSummary m = summarize({synthetic_log(Outcome::Timeout, 30.0, 5.0, 40, 3),
                                      synthetic_log(Outcome::Timeout, 30.0, 5.0, 10, 10)});
  CHECK(m.AIR == doctest::Approx((7.5 + 100.0) / 2));
  CHECK(m.OR == 100.0);
  CHECK(std::isnan(m.ANT));
  CHECK(std::isnan(m.ATL));
}

TEST_CASE("all successes") {
  const MetricsSummary m = summarize({synthetic_log(Outcome::Success, 12.0, 12.0, 48, 0),
                                      synthetic_log(Outcome::Success, 14.0, 13.0, 56, 0)});
  CHECK(m.SR == 100.0);
  CHECK(m.CR == 0.0);
  CHECK(m.OR == 0.0);
  CHECK(m.ANT == 13.0);
  CHECK(m.ATL == 12.5);
}

TEST_CASE("intrusion flag uses ground-truth labels and margins") {
  WorldState w;
  w.robot.position = Vec2(0, 0);
  AgentState p;
  p.radius = 0.3;
  p.behavior = Behavior::Cooperative;
  // Gap 0.45: outside the cooperative distance (0.2), inside the non-cooperative one (0.5).
  p.position = Vec2(1.05, 0);
  w.pedestrians = {p};
  CHECK_FALSE(intrusion(w, SafetyMargins{}));
  w.pedestrians[0].behavior = Behavior::NonCooperative;
  CHECK(intrusion(w, SafetyMargins{}));
}

TEST_CASE("empty arena: the full stack drives straight to the goal") {
  const SimConfig config = empty_arena();
  const EpisodeLog log = run_episode(config, untrained_full(), 7);
  REQUIRE(log.outcome == Outcome::Success);
  const double straight = 2 * config.arena_spawn_radius;
  // Kinematic bound: no faster than 2 R / v_max; within 20% of distance / v_ref.
  CHECK(log.duration >= straight / config.v_max - config.goal_tolerance / config.v_max - config.dt);
  CHECK(log.duration == doctest::Approx(straight / config.v_ref).epsilon(0.2));
  CHECK(log.path_length >= straight - config.goal_tolerance - 1e-9);
  CHECK(log.degraded_steps == 0);
}

TEST_CASE("orca baseline enclosed by a ring of standing pedestrians times out") {
  SimConfig config = empty_arena();
  config.recycle_goals = false;
  EpisodeOptions options;
  options.edit_world = [](WorldState& w) {
    w.pedestrians.clear();
    const int n = 16;
    const double ring = 1.6;
    for (int i = 0; i < n; ++i) {
      const double a = 2 * std::numbers::pi * i / n;
      AgentState p;
      p.id = i;
      p.radius = 0.3;
      p.position = w.robot.position + ring * Vec2(std::cos(a), std::sin(a));
      p.goal = p.position;
      p.pref_speed = 0.0;
      p.behavior = Behavior::NonCooperative;
      w.pedestrians.push_back(p);
    }
  };
  const EpisodeLog log = run_episode(config, PolicyStack::parse("orca"), 1, options);
  CHECK(log.outcome == Outcome::Timeout);
  for (const auto& s : log.steps)
    for (const auto& p : s.peds) CHECK((p.position - log.start).norm() == doctest::Approx(1.6).epsilon(1e-9));
}

TEST_CASE("orca forward speed respects the constraints the desired velocity meets") {
  // Permitted side of a line is to the left of its direction.
  const OrcaHalfPlane y_nonneg{Vec2(0, 0), Vec2(1, 0)};
  CHECK(y_nonneg.contains(Vec2(1, 0)));
  CHECK_FALSE(y_nonneg.contains(Vec2(0, -0.1)));
  CHECK(orca_feasible_speed(1.0, Vec2(0.6, -0.8), Vec2(1, 0), {y_nonneg}) == 0.0);
  CHECK(orca_feasible_speed(1.0, Vec2(0.6, 0.8), Vec2(1, 0), {y_nonneg}) == 1.0);
  CHECK(orca_feasible_speed(-0.5, Vec2(0.6, -0.8), Vec2(1, 0), {y_nonneg}) == -0.5);

  const OrcaHalfPlane y_above{Vec2(0, 0.4), Vec2(1, 0)};
  CHECK(orca_feasible_speed(1.0, Vec2(0, 1), Vec2(0, 1), {y_above}) == 1.0);
  CHECK(orca_feasible_speed(0.2, Vec2(0, 1), Vec2(0, 1), {y_above}) == 0.0);
  const OrcaHalfPlane y_below{Vec2(0, 0.7), Vec2(-1, 0)};
  CHECK(orca_feasible_speed(1.0, Vec2(0, 1), Vec2(0, 0.5), {y_above, y_below}) == doctest::Approx(0.7));
  // A constraint the desired velocity already breaks is ignored.
  CHECK(orca_feasible_speed(1.0, Vec2(1, 0), Vec2(0, 0.1), {y_above}) == 1.0);
}

TEST_CASE("episodes are deterministic and logs complete") {
  const SimConfig config = scenario_preset("mid");
  for (const char* name : {"orca", "sf"}) {
    const PolicyStack stack = PolicyStack::parse(name);
    const EpisodeLog a = run_episode(config, stack, 42);
    const EpisodeLog b = run_episode(config, stack, 42);
    const fs::path dir = scratch_dir(std::string("det_") + name);
    write_episode_log((dir / "a.jsonl").string(), a);
    write_episode_log((dir / "b.jsonl").string(), b);
    CHECK(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"));
    REQUIRE_FALSE(a.steps.empty());
    CHECK(a.steps.front().digest == world_digest(spawn_scenario(config, 42)));
    for (const auto& s : a.steps) {
      const RewardBreakdown& r = s.reward;
      CHECK(r.r_term + r.r_pot + r.r_kin + r.r_horizon + r.r_vis_social == doctest::Approx(r.r_total).epsilon(1e-12));
      CHECK(s.horizon == 0);
      CHECK(s.visible.size() == s.coop_probs.size());
    }
    CHECK(a.steps.size() == static_cast<std::size_t>(std::lround(a.duration / config.dt)));
  }
}

TEST_CASE("evaluate: metric identities and byte-identical csv") {
  const SimConfig config = scenario_preset("high");
  EpisodeOptions options;
  options.scenario = "high";
  std::vector<EpisodeLog> logs;
  const MetricsSummary m = evaluate(config, PolicyStack::parse("sf"), 6, 100, options, &logs);
  CHECK(m.SR + m.CR + m.OR == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(m.scenario == "high");
  CHECK(m.stack == "sf");
  REQUIRE(logs.size() == 6);
  for (std::size_t i = 0; i < logs.size(); ++i) {
    CHECK(logs[i].seed == 100 + i);
    if (logs[i].outcome == Outcome::Success) {
      const double straight = (logs[i].goal - logs[i].start).norm() - config.goal_tolerance;
      CHECK(logs[i].path_length >= straight - 1e-9);
      CHECK(logs[i].duration >= logs[i].path_length / config.v_max - 1e-9);
    }
  }
  const fs::path dir = scratch_dir("csv");
  write_episode_csv((dir / "a.csv").string(), m);
  write_episode_csv((dir / "b.csv").string(), evaluate(config, PolicyStack::parse("sf"), 6, 100, options));
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  const std::string csv = slurp(dir / "a.csv");
  CHECK(csv.rfind("episode,seed,outcome,duration,path_length,air,steps,degraded_steps\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);

  const auto j = nlohmann::json::parse(summary_json(m));
  CHECK(j.at("n_episodes") == 6);
  CHECK(j.at("SR").get<double>() + j.at("CR").get<double>() + j.at("OR").get<double>() == doctest::Approx(100.0));
}

TEST_CASE("episode log round trip") {
  const EpisodeLog log = run_episode(scenario_preset("mid"), PolicyStack::parse("sf"), 5);
  const fs::path dir = scratch_dir("roundtrip");
  write_episode_log((dir / "log.jsonl").string(), log);
  const EpisodeLog back = read_episode_log((dir / "log.jsonl").string());
  CHECK(back.outcome == log.outcome);
  CHECK(back.stack == "sf");
  CHECK(back.seed == 5);
  CHECK(back.duration == log.duration);
  CHECK(back.path_length == log.path_length);
  REQUIRE(back.steps.size() == log.steps.size());
  for (std::size_t k = 0; k < log.steps.size(); ++k) {
    CHECK(back.steps[k].digest == log.steps[k].digest);
    CHECK(back.steps[k].robot == log.steps[k].robot);
    CHECK(back.steps[k].visible == log.steps[k].visible);
    CHECK(back.steps[k].intrusion == log.steps[k].intrusion);
    CHECK(back.steps[k].reward.r_total == log.steps[k].reward.r_total);
    CHECK(back.steps[k].peds.size() == log.steps[k].peds.size());
  }
  write_episode_log((dir / "again.jsonl").string(), back);
  CHECK(slurp(dir / "log.jsonl") == slurp(dir / "again.jsonl"));

  std::ofstream(dir / "broken.jsonl") << "{\"type\":\"episode_start\"}\n";
  CHECK_THROWS_AS(read_episode_log((dir / "broken.jsonl").string()), FormatError);
}

TEST_CASE("trajectory svg") {
  EpisodeLog log = run_episode(scenario_preset("high"), PolicyStack::parse("sf"), 9);
  const std::string full = render_trajectory(log);
  CHECK(well_formed_xml(full));
  CHECK(count_of(full, "class=\"robot\"") == log.steps.size());
  CHECK(count_of(full, "class=\"goal\"") == 1);
  CHECK(count_of(full, "class=\"sensing\"") == 1);

  // Legend mapping: cooperative green, non-cooperative red.
  std::size_t coop = 0, noncoop = 0;
  for (const auto& p : log.steps.back().peds) (p.cooperative ? coop : noncoop)++;
  CHECK(count_of(full, "fill=\"#2ca02c\" fill-opacity") == coop);
  CHECK(count_of(full, "fill=\"#d62728\" fill-opacity") == noncoop);

  log.steps.resize(1);
  const std::string one = render_trajectory(log);
  CHECK(well_formed_xml(one));
  CHECK(count_of(one, "class=\"robot\"") == 1);

  log.steps.clear();
  CHECK_THROWS(render_trajectory(log));
  CHECK_FALSE(well_formed_xml("<svg><g></svg></g>"));
}

TEST_CASE("fixed horizon sweep") {
  SimConfig config = empty_arena();
  config.timeout = 3.0;
  Rng rng(1);
  auto coop = std::make_shared<const CoopNetParams>(CoopNetParams::init({}, &rng));
  const auto single = fixed_horizon_sweep({{"a", config}}, {3}, 1, 0, coop);
  REQUIRE(single.size() == 1);
  CHECK(single[0].h == 3);
  CHECK(single[0].metrics.stack == "fixed-3");

  const auto rows = fixed_horizon_sweep({{"a", config}, {"b", config}}, {1, 2, 4}, 2, 0, coop);
  REQUIRE(rows.size() == 6);
  CHECK(rows[0].scenario == "a");
  CHECK(rows[5].scenario == "b");
  CHECK(rows[5].h == 4);
  const std::string svg = render_sweep(rows);
  CHECK(well_formed_xml(svg));
  CHECK(count_of(svg, "class=\"series\"") == 2);

  const fs::path dir = scratch_dir("sweep");
  write_sweep_csv((dir / "s.csv").string(), rows);
  const std::string csv = slurp(dir / "s.csv");
  CHECK(csv.rfind("scenario,h,SR,CR,OR,ANT\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
}

TEST_CASE("stack parsing and validation") {
  CHECK(PolicyStack::parse("fixed-7").fixed_h == 7);
  CHECK(PolicyStack::parse("fixed-7").name() == "fixed-7");
  CHECK(PolicyStack::parse("nocoop").kind == StackKind::NoCoop);
  CHECK_THROWS_AS(PolicyStack::parse("fixed-"), std::invalid_argument);
  CHECK_THROWS_AS(PolicyStack::parse("greedy"), std::invalid_argument);
  CHECK_THROWS_AS(PolicyStack::parse("fixed-0").validate(10), ScenarioError);
  CHECK_THROWS_AS(PolicyStack::parse("fixed-11").validate(10), ScenarioError);
  CHECK_THROWS_AS(PolicyStack::parse("full").validate(10), ScenarioError);
  CHECK_NOTHROW(PolicyStack::parse("orca").validate(10));
  CHECK_THROWS_AS(run_episode(scenario_preset("mid"), PolicyStack::parse("nocoop"), 1), ScenarioError);
}

TEST_CASE("navigation env steps the full stack") {
  Rng rng(2);
  auto coop = std::make_shared<const CoopNetParams>(CoopNetParams::init({}, &rng));
  NavEnv env({scenario_preset("mid")}, coop, NavigatorConfig{}, RewardCoeffs{});
  const PolicyObservation obs = env.reset(3);
  CHECK(obs.peds.cols() == 5);
  int steps = 0;
  bool done = false;
  while (!done && steps < 200) {
    const auto s = env.step(1 + steps % 10);
    CHECK(std::isfinite(s.reward.r_total));
    CHECK(s.reward.r_horizon == doctest::Approx(-0.01 * (10 - (1 + steps % 10))));
    done = s.done;
    ++steps;
  }
  CHECK(done);
  CHECK(steps <= 121);
  CHECK_THROWS(NavEnv({scenario_preset("mid")}, nullptr, NavigatorConfig{}, RewardCoeffs{}));
}

TEST_CASE("config files") {
  const ConfigFile f = ConfigFile::parse(
      "# comment\n[sim]\ntimeout = 12.5 ; trailing\nrecycle_goals = false\n[sim.orca]\ntime_horizon=3\n"
      "[mpc]\nd_noncoop = 0.5\nq_theta = 0.2\n[reward]\nlambda_h = 0.02\n[navigator]\nh_max = 8\n");
  const RunConfig rc = apply_config(f);
  CHECK(rc.sim.timeout == 12.5);
  CHECK_FALSE(rc.sim.recycle_goals);
  CHECK(rc.sim.orca.time_horizon == 3.0);
  CHECK(rc.nav.margins.d_noncoop == 0.5);
  CHECK(rc.nav.weights.Q(2, 2) == 0.2);
  CHECK(rc.reward.lambda_h == 0.02);
  CHECK(rc.nav.h_max == 8);
  CHECK(rc.reward.h_max == 8);
  CHECK(rc.policy_train.h_max == 8);

  CHECK_THROWS_AS(apply_config(ConfigFile::parse("[sim]\nwarp = 1\n")), ConfigError);
  CHECK_THROWS_AS(apply_config(ConfigFile::parse("[sim]\ndt = fast\n")), ConfigError);
  CHECK_THROWS_AS(apply_config(ConfigFile::parse("[sim]\ndt = -1\n")), ConfigError);
  CHECK_THROWS_AS(ConfigFile::parse("[sim\n"), ConfigError);
  CHECK_THROWS_AS(ConfigFile::parse("[sim]\ndt\n"), ConfigError);
  CHECK_THROWS_AS(ConfigFile::parse("[sim]\ndt = 1\ndt = 2\n"), ConfigError);
  CHECK_THROWS_AS(ConfigFile::load("/nonexistent/hnav.ini"), ConfigError);

  // The shipped example spells out the defaults.
  const RunConfig example = apply_config(ConfigFile::load(HNAV_SOURCE_DIR "/docs/example.ini"));
  const RunConfig defaults = apply_config(ConfigFile{});
  CHECK(example.sim.timeout == defaults.sim.timeout);
  CHECK(example.nav.margins.gamma == defaults.nav.margins.gamma);
  CHECK(example.reward.lambda_high == defaults.reward.lambda_high);
  CHECK(example.policy_train.updates == defaults.policy_train.updates);
  CHECK(example.coop_train.epochs == defaults.coop_train.epochs);
}

TEST_CASE("cli: eval, replay, sweep and exit codes") {
  const fs::path dir = scratch_dir("cli");
  const std::string out = (dir / "runs").string();
  REQUIRE(cli({"eval", "--stack", "orca", "--scenario", "mid", "--episodes", "3", "--seed", "1", "--out", out,
               "--logs"}) == kExitOk);
  const auto summary = nlohmann::json::parse(slurp(dir / "runs" / "summary.json"));
  CHECK(summary.at("SR").get<double>() + summary.at("CR").get<double>() + summary.at("OR").get<double>() ==
        doctest::Approx(100.0));
  CHECK(fs::exists(dir / "runs" / "episodes.csv"));
  CHECK(fs::exists(dir / "runs" / "logs" / "episode_0002.jsonl"));

  const std::string again = (dir / "again").string();
  REQUIRE(cli({"eval", "--stack", "orca", "--scenario", "mid", "--episodes", "3", "--seed", "1", "--out", again}) ==
          kExitOk);
  CHECK(slurp(dir / "runs" / "episodes.csv") == slurp(dir / "again" / "episodes.csv"));

  CHECK(cli({"replay", "--log", (dir / "runs" / "logs" / "episode_0000.jsonl").string(), "--out", out}) == kExitOk);
  CHECK(well_formed_xml(slurp(dir / "runs" / "episode_0000.svg")));
  CHECK(cli({"replay", "--log", (dir / "missing.jsonl").string(), "--out", out}) == kExitRuntime);

  std::string err;
  CHECK(cli({"eval", "--stack", "orca", "--warp"}, &err) == kExitUsage);
  CHECK(err.find("--warp") != std::string::npos);
  CHECK(cli({}) == kExitUsage);
  CHECK(cli({"fly"}) == kExitUsage);
  CHECK(cli({"eval", "--stack", "teleport"}) == kExitUsage);
  CHECK(cli({"eval", "--stack", "full"}) == kExitUsage);
  CHECK(cli({"eval", "--stack", "orca", "--episodes", "0"}) == kExitUsage);

  // Sweep on a tiny config: empty arena, short timeout.
  Rng rng(5);
  CoopNetParams::init({}, &rng).save((dir / "coop.bin").string());
  std::ofstream(dir / "tiny.ini") << "[sim]\nn_cooperative = 0\nn_noncooperative = 0\ntimeout = 2\n";
  const std::string sweep_out = (dir / "sweep").string();
  REQUIRE(cli({"sweep", "--episodes", "1", "--scenario", "low,high", "--horizons", "1,3", "--coop",
               (dir / "coop.bin").string(), "--config", (dir / "tiny.ini").string(), "--out", sweep_out}) == kExitOk);
  const std::string csv = slurp(dir / "sweep" / "sweep.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
  CHECK(well_formed_xml(slurp(dir / "sweep" / "sweep.svg")));

  std::ofstream(dir / "bad.ini") << "[mpc]\nwarp = 1\n";
  CHECK(cli({"eval", "--stack", "sf", "--episodes", "1", "--config", (dir / "bad.ini").string(), "--out", out}) ==
        kExitUsage);
}
