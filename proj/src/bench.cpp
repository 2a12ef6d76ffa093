#include "hnav/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <limits>
#include <thread>

namespace hnav {

namespace {

void fnv_bytes(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ULL;
  }
}

void fnv_double(std::uint64_t& h, double v) {
  if (v == 0.0) v = 0.0;  // fold -0
  fnv_bytes(h, &v, sizeof v);
}

}  // namespace

std::uint64_t world_digest(const WorldState& world) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  fnv_double(h, world.robot.position.x());
  fnv_double(h, world.robot.position.y());
  fnv_double(h, world.robot.heading);
  fnv_double(h, world.time);
  for (const auto& p : world.pedestrians) {
    const std::int64_t id = p.id;
    fnv_bytes(h, &id, sizeof id);
    fnv_double(h, p.position.x());
    fnv_double(h, p.position.y());
    fnv_double(h, p.velocity.x());
    fnv_double(h, p.velocity.y());
  }
  return h;
}

bool intrusion(const WorldState& world, const SafetyMargins& margins) {
  for (const auto& p : world.pedestrians) {
    const int label = p.behavior == Behavior::Cooperative ? 1 : 0;
    if (barrier_value(world.robot.position, p.position, world.robot.radius, p.radius, label, margins) < 0.0)
      return true;
  }
  return false;
}

EpisodeLog run_episode(const SimConfig& config, const PolicyStack& stack, std::uint64_t seed,
                       const EpisodeOptions& options) {
  config.validate();
  stack.validate(options.nav.h_max);
  WorldState world = spawn_scenario(config, seed);
  if (options.edit_world) options.edit_world(world);

  Navigator nav(config, stack, options.nav);
  Rng horizon_rng(seed ^ 0x48D12A7ULL);
  RewardCoeffs coeffs = options.reward;
  coeffs.h_max = options.nav.h_max;

  EpisodeLog log;
  log.scenario = options.scenario;
  log.stack = stack.name();
  log.seed = seed;
  log.start = world.robot.position;
  log.goal = world.robot.goal;
  log.sensing_range = config.sensing_range;

  Outcome outcome = classify_outcome(world, config);
  while (outcome == Outcome::Running) {
    StepRecord rec;
    rec.step = static_cast<int>(world.step_index);
    rec.time = world.time;
    rec.digest = world_digest(world);
    rec.robot = Vec3(world.robot.position.x(), world.robot.position.y(), world.robot.heading);
    for (const auto& p : world.pedestrians)
      rec.peds.push_back({p.id, p.position, p.behavior == Behavior::Cooperative});

    ControlDecision decision;
    Perception perception;
    try {
      perception = nav.perceive(world);
      const int h = nav.choose_horizon(perception, &horizon_rng);
      decision = nav.control(world, perception, h);
    } catch (const std::exception& e) {
      decision = ControlDecision{};
      decision.degraded = true;
      decision.note = std::string("stack failure: ") + e.what();
    }
    if (decision.degraded) {
      ++log.degraded_steps;
      log.notes.push_back("step " + std::to_string(rec.step) + ": " + decision.note);
    }
    rec.visible = perception.visible;
    for (const auto& o : perception.obs) rec.coop_probs.push_back(o.coop_prob);
    rec.horizon = decision.horizon;
    rec.control = config.clamp(decision.control);
    if (decision.mpc_status) rec.mpc_status = mpc_status_name(*decision.mpc_status);
    for (const auto& o : perception.obs) {
      const double b = barrier_value(Vec2::Zero(), o.rel_position, world.robot.radius, config.ped_radius,
                                     o.coop_label, options.nav.margins);
      rec.min_barrier = rec.min_barrier ? std::min(*rec.min_barrier, b) : b;
    }

    const WorldState next = step_world(world, rec.control, config);
    log.path_length += (next.robot.position - world.robot.position).norm();
    outcome = classify_outcome(next, config);
    rec.reward = compute_reward(world, next, rec.control, rec.horizon, perception.obs, outcome, coeffs);
    rec.intrusion = intrusion(next, options.nav.margins);
    log.steps.push_back(std::move(rec));
    world = next;
  }
  log.outcome = outcome;
  log.duration = world.time;
  log.final_robot = Vec3(world.robot.position.x(), world.robot.position.y(), world.robot.heading);
  return log;
}

double intrusion_ratio(const EpisodeLog& log) {
  if (log.steps.empty()) return 0.0;
  const auto n = std::count_if(log.steps.begin(), log.steps.end(), [](const StepRecord& s) { return s.intrusion; });
  return 100.0 * static_cast<double>(n) / static_cast<double>(log.steps.size());
}

MetricsSummary summarize(const std::vector<EpisodeLog>& logs) {
  MetricsSummary m;
  m.n_episodes = static_cast<int>(logs.size());
  if (!logs.empty()) {
    m.scenario = logs.front().scenario;
    m.stack = logs.front().stack;
  }
  int collisions = 0, timeouts = 0;
  double time_sum = 0.0, length_sum = 0.0, air_sum = 0.0;
  for (const auto& log : logs) {
    EpisodeRow row;
    row.seed = log.seed;
    row.outcome = log.outcome;
    row.duration = log.duration;
    row.path_length = log.path_length;
    row.air = intrusion_ratio(log);
    row.steps = static_cast<int>(log.steps.size());
    row.degraded_steps = log.degraded_steps;
    m.rows.push_back(row);
    air_sum += row.air;
    if (log.outcome == Outcome::Success) {
      ++m.n_success;
      time_sum += log.duration;
      length_sum += log.path_length;
    } else if (log.outcome == Outcome::Collision) {
      ++collisions;
    } else {
      ++timeouts;
    }
  }
  if (m.n_episodes == 0) return m;
  const double n = m.n_episodes;
  m.SR = 100.0 * m.n_success / n;
  m.CR = 100.0 * collisions / n;
  m.OR = 100.0 * timeouts / n;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  m.ANT = m.n_success ? time_sum / m.n_success : nan;
  m.ATL = m.n_success ? length_sum / m.n_success : nan;
  m.AIR = air_sum / n;
  return m;
}

int worker_threads() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (const char* env = std::getenv("HORIZON_NAV_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && cap >= 1) n = std::min<int>(n, static_cast<int>(cap));
  }
  return n;
}

std::vector<EpisodeLog> run_episodes(const SimConfig& config, const PolicyStack& stack, int n_episodes,
                                     std::uint64_t base_seed, const EpisodeOptions& options) {
  if (n_episodes < 1) throw std::invalid_argument("need at least one episode");
  stack.validate(options.nav.h_max);
  std::vector<EpisodeLog> logs(static_cast<std::size_t>(n_episodes));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (int i = next++; i < n_episodes && !failed; i = next++) {
      try {
        logs[static_cast<std::size_t>(i)] = run_episode(config, stack, base_seed + static_cast<std::uint64_t>(i), options);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  const int threads = std::min(worker_threads(), n_episodes);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return logs;
}

MetricsSummary evaluate(const SimConfig& config, const PolicyStack& stack, int n_episodes,
                        std::uint64_t base_seed, const EpisodeOptions& options,
                        std::vector<EpisodeLog>* logs) {
  std::vector<EpisodeLog> all = run_episodes(config, stack, n_episodes, base_seed, options);
  MetricsSummary m = summarize(all);
  m.scenario = options.scenario;
  m.stack = stack.name();
  if (logs) *logs = std::move(all);
  return m;
}

std::vector<SweepRow> fixed_horizon_sweep(const std::vector<std::pair<std::string, SimConfig>>& scenarios,
                                          const std::vector<int>& horizons, int n_episodes,
                                          std::uint64_t base_seed,
                                          std::shared_ptr<const CoopNetParams> coop,
                                          const EpisodeOptions& options) {
  std::vector<SweepRow> rows;
  for (const auto& [name, config] : scenarios) {
    for (int h : horizons) {
      PolicyStack stack;
      stack.kind = StackKind::FixedHorizon;
      stack.fixed_h = h;
      stack.coop = coop;
      EpisodeOptions opt = options;
      opt.scenario = name;
      rows.push_back({name, h, evaluate(config, stack, n_episodes, base_seed, opt)});
    }
  }
  return rows;
}

}  // namespace hnav
