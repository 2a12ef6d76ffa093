#include "hnav/world.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

namespace hnav {

void SimConfig::validate() const {
  if (n_cooperative < 0 || n_noncooperative < 0)
    throw std::invalid_argument("pedestrian counts must be non-negative");
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (!(timeout > dt)) throw std::invalid_argument("timeout must exceed dt");
  if (!(robot_radius > 0.0) || !(ped_radius > 0.0))
    throw std::invalid_argument("radii must be positive");
  if (!(ped_pref_speed > 0.0)) throw std::invalid_argument("ped_pref_speed must be positive");
  if (!(v_max > v_min) || !(w_max > 0.0)) throw std::invalid_argument("invalid control bounds");
  if (!(arena_spawn_radius > 0.0)) throw std::invalid_argument("arena_spawn_radius must be positive");
  if (!(sensing_range > 0.0)) throw std::invalid_argument("sensing_range must be positive");
  if (!(orca.time_horizon > 0.0) || orca.max_neighbors < 0)
    throw std::invalid_argument("invalid ORCA parameters");
  if (!(sf.B > 0.0) || !(sf.relaxation_time > 0.0))
    throw std::invalid_argument("invalid social-force parameters");
}

Control SimConfig::clamp(const Control& u) const {
  return {std::clamp(u.v, v_min, v_max), std::clamp(u.w, -w_max, w_max)};
}

SimConfig scenario_preset(const std::string& name) {
  SimConfig config;
  if (name == "low") {
    config.n_cooperative = 0;
    config.n_noncooperative = 20;
  } else if (name == "mid") {
    config.n_cooperative = 5;
    config.n_noncooperative = 15;
  } else if (name == "high") {
    config.n_cooperative = 10;
    config.n_noncooperative = 10;
  } else {
    throw std::invalid_argument("unknown scenario preset: " + name);
  }
  return config;
}

namespace {

Vec2 sample_disc(Rng& rng, double radius) {
  const double r = radius * std::sqrt(rng.uniform());
  const double a = rng.uniform(-std::numbers::pi, std::numbers::pi);
  return {r * std::cos(a), r * std::sin(a)};
}

constexpr double kSpawnClearance = 0.2;
constexpr int kMaxSpawnAttempts = 10000;
constexpr double kPerturbRadius = 0.5;

}  // namespace

WorldState spawn_scenario(const SimConfig& config, std::uint64_t seed) {
  config.validate();
  WorldState world;
  world.rng_seed = seed;

  const double R = config.arena_spawn_radius;
  RobotState& robot = world.robot;
  robot.position = Vec2(0.0, -R);
  robot.goal = Vec2(0.0, R);
  robot.heading = std::numbers::pi / 2.0;
  robot.radius = config.robot_radius;
  robot.ref_speed = config.v_ref;

  Rng rng(seed);
  const int total = config.n_cooperative + config.n_noncooperative;
  int attempts = 0;
  for (int id = 0; id < total; ++id) {
    AgentState ped;
    ped.id = id;
    ped.radius = config.ped_radius;
    ped.pref_speed = config.ped_pref_speed;
    ped.behavior = id < config.n_cooperative ? Behavior::Cooperative : Behavior::NonCooperative;
    ped.controller = config.ped_controller;
    for (;;) {
      if (++attempts > kMaxSpawnAttempts)
        throw ScenarioError("spawn_scenario: rejection sampling exhausted (over-dense config)");
      const double angle = rng.uniform(-std::numbers::pi, std::numbers::pi);
      const Vec2 on_circle(R * std::cos(angle), R * std::sin(angle));
      const Vec2 position = on_circle + sample_disc(rng, kPerturbRadius);
      const Vec2 goal = -on_circle + sample_disc(rng, kPerturbRadius);

      const double min_sep = 2.0 * config.ped_radius + kSpawnClearance;
      const double min_sep_robot = config.ped_radius + config.robot_radius + kSpawnClearance;
      bool ok = (position - robot.position).norm() >= min_sep_robot &&
                (goal - robot.goal).norm() >= min_sep_robot;
      for (const auto& other : world.pedestrians) {
        if (!ok) break;
        ok = (position - other.position).norm() >= min_sep &&
             (goal - other.goal).norm() >= min_sep;
      }
      if (ok) {
        ped.position = position;
        ped.goal = goal;
        break;
      }
    }
    world.pedestrians.push_back(ped);
  }
  return world;
}

RobotState unicycle_step(const RobotState& state, const Control& u, double dt) {
  RobotState next = state;
  next.position = state.position + u.v * dt * Vec2(std::cos(state.heading), std::sin(state.heading));
  next.heading = wrap_angle(state.heading + u.w * dt);
  next.forward_speed = u.v;
  next.velocity = u.v * Vec2(std::cos(next.heading), std::sin(next.heading));
  return next;
}

Vec2 preferred_velocity(const AgentState& agent, double dt) {
  const Vec2 to_goal = agent.goal - agent.position;
  const double dist = to_goal.norm();
  if (dist < 1e-12) return Vec2::Zero();
  if (dist < agent.pref_speed * dt) return to_goal / dt;
  return to_goal * (agent.pref_speed / dist);
}

AgentState robot_as_agent(const RobotState& robot, double pref_speed) {
  AgentState a;
  a.id = -1;
  a.position = robot.position;
  a.velocity = robot.velocity;
  a.radius = robot.radius;
  a.goal = robot.goal;
  a.pref_speed = pref_speed;
  a.behavior = Behavior::Cooperative;
  return a;
}

namespace {

// Limits the change of walking direction to max_turn radians per step. A
// sharper request is projected onto the furthest permitted direction, so the
// walker slows down instead of orbiting.
Vec2 limit_turn(const Vec2& old_velocity, const Vec2& new_velocity, double max_turn) {
  const double old_speed = old_velocity.norm();
  const double new_speed = new_velocity.norm();
  if (old_speed < 1e-3 || new_speed < 1e-9) return new_velocity;
  const double old_angle = std::atan2(old_velocity.y(), old_velocity.x());
  const double delta =
      wrap_angle(std::atan2(new_velocity.y(), new_velocity.x()) - old_angle);
  if (std::abs(delta) <= max_turn) return new_velocity;
  const double angle = old_angle + std::copysign(max_turn, delta);
  const Vec2 dir(std::cos(angle), std::sin(angle));
  return std::max(0.0, new_velocity.dot(dir)) * dir;
}

std::uint64_t mix_seed(std::uint64_t seed, std::int64_t step, int id) {
  Rng rng(seed ^ (static_cast<std::uint64_t>(step) * 0xA24BAED4963EE407ULL) ^
          (static_cast<std::uint64_t>(id + 7) * 0x9FB21C651E98DF25ULL));
  return rng.next_u64();
}

}  // namespace

WorldState step_world(const WorldState& world, const Control& robot_control,
                      const SimConfig& config) {
  WorldState next = world;
  const double dt = config.dt;
  const AgentState robot_agent = robot_as_agent(world.robot, config.v_max);
  const std::optional<AgentState> robot_opt(robot_agent);

  for (std::size_t i = 0; i < world.pedestrians.size(); ++i) {
    const AgentState& ped = world.pedestrians[i];
    Vec2 v;
    if (ped.controller == PedController::Orca) {
      // Exactly collinear encounters are a fixed point of ORCA; a small
      // deterministic twist of the goal direction breaks the symmetry.
      AgentState jittered = ped;
      Rng jitter(mix_seed(world.rng_seed ^ 0x0CA11ULL, world.step_index, ped.id));
      jittered.goal = ped.position + rotate<double>(ped.goal - ped.position, jitter.uniform(-0.02, 0.02));
      v = orca_velocity(jittered, world.pedestrians, robot_opt, config.orca, dt);
    } else {
      std::vector<AgentState> neighbors = world.pedestrians;
      if (ped.behavior == Behavior::Cooperative) neighbors.push_back(robot_agent);
      v = social_force_velocity(ped, neighbors, config.sf, dt,
                                mix_seed(world.rng_seed, world.step_index, ped.id));
    }
    v = limit_turn(ped.velocity, v, config.w_max * dt);
    const double speed = v.norm();
    if (speed > ped.pref_speed) v *= ped.pref_speed / speed;

    AgentState& out = next.pedestrians[i];
    out.velocity = v;
    out.position = ped.position + v * dt;
    if (config.recycle_goals && (out.goal - out.position).norm() < config.goal_tolerance) {
      Rng rng(mix_seed(world.rng_seed ^ 0x5EEDULL, world.step_index, ped.id));
      const double angle = rng.uniform(-std::numbers::pi, std::numbers::pi);
      out.goal = config.arena_spawn_radius * Vec2(std::cos(angle), std::sin(angle));
    }
  }

  next.robot = unicycle_step(world.robot, config.clamp(robot_control), dt);
  next.step_index = world.step_index + 1;
  next.time = static_cast<double>(next.step_index) * dt;
  return next;
}

std::optional<CollisionReport> detect_collision(const WorldState& world) {
  std::optional<CollisionReport> report;
  for (const auto& ped : world.pedestrians) {
    const double depth =
        world.robot.radius + ped.radius - (world.robot.position - ped.position).norm();
    if (depth <= 0.0) continue;
    if (!report || depth > report->penetration_depth ||
        (depth == report->penetration_depth && ped.id < report->ped_id)) {
      report = CollisionReport{ped.id, depth};
    }
  }
  return report;
}

}  // namespace hnav
