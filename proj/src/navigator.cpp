#include "hnav/navigator.hpp"

#include <algorithm>
#include <cmath>

namespace hnav {

PolicyStack PolicyStack::parse(const std::string& name) {
  PolicyStack s;
  if (name == "full") s.kind = StackKind::Full;
  else if (name == "nocoop") s.kind = StackKind::NoCoop;
  else if (name == "orca") s.kind = StackKind::OrcaBaseline;
  else if (name == "sf") s.kind = StackKind::SfBaseline;
  else if (name.rfind("fixed-", 0) == 0) {
    s.kind = StackKind::FixedHorizon;
    const std::string digits = name.substr(6);
    if (digits.empty() || !std::all_of(digits.begin(), digits.end(), ::isdigit) || digits.size() > 3)
      throw std::invalid_argument("bad fixed horizon in stack name: " + name);
    s.fixed_h = std::stoi(digits);
  } else {
    throw std::invalid_argument("unknown stack: " + name + " (full, fixed-<h>, nocoop, orca, sf)");
  }
  return s;
}

std::string PolicyStack::name() const {
  switch (kind) {
    case StackKind::Full: return "full";
    case StackKind::FixedHorizon: return "fixed-" + std::to_string(fixed_h);
    case StackKind::NoCoop: return "nocoop";
    case StackKind::OrcaBaseline: return "orca";
    case StackKind::SfBaseline: return "sf";
  }
  return "unknown";
}

void PolicyStack::validate(int h_max) const {
  if (kind == StackKind::FixedHorizon && (fixed_h < 1 || fixed_h > h_max))
    throw ScenarioError("fixed horizon " + std::to_string(fixed_h) + " outside 1.." + std::to_string(h_max));
  if (needs_coop() && !coop) throw ScenarioError(name() + " stack needs coop-net parameters");
  if (needs_policy() && !policy) throw ScenarioError(name() + " stack needs policy parameters");
  if (policy && policy->h_max != h_max)
    throw ScenarioError("policy h_max " + std::to_string(policy->h_max) + " does not match " +
                        std::to_string(h_max));
}

Control inverse_kinematics(const RobotState& robot, const Vec2& desired, const SimConfig& sim) {
  const Vec2 forward(std::cos(robot.heading), std::sin(robot.heading));
  Control u;
  u.v = std::clamp(desired.dot(forward), sim.v_min, sim.v_max);
  if (desired.norm() > 1e-9) {
    const double err = wrap_angle(std::atan2(desired.y(), desired.x()) - robot.heading);
    u.w = std::clamp(err / sim.dt, -sim.w_max, sim.w_max);
  }
  return u;
}

double orca_feasible_speed(double v, const Vec2& forward, const Vec2& desired,
                           const std::vector<OrcaHalfPlane>& constraints) {
  double lo = std::min(0.0, v), hi = std::max(0.0, v);
  for (const auto& c : constraints) {
    if (!c.contains(desired)) continue;  // given up by the solver's fallback
    // s * forward is permitted iff s * cross(d, f) >= cross(d, p).
    const double a = cross2(c.direction, c.point);
    const double b = cross2(c.direction, forward);
    if (b > 1e-12) lo = std::max(lo, a / b);
    else if (b < -1e-12) hi = std::min(hi, a / b);
    else if (a > 1e-9) return 0.0;
  }
  if (lo > hi) return 0.0;
  return std::clamp(v, lo, hi);
}

Outcome classify_outcome(const WorldState& world, const SimConfig& sim) {
  if (detect_collision(world)) return Outcome::Collision;
  if ((world.robot.position - world.robot.goal).norm() < sim.goal_tolerance) return Outcome::Success;
  if (world.time >= sim.timeout - 1e-9) return Outcome::Timeout;
  return Outcome::Running;
}

Navigator::Navigator(SimConfig sim, PolicyStack stack, NavigatorConfig config)
    : sim_(std::move(sim)),
      stack_(std::move(stack)),
      config_(config),
      settings_(MpcSettings::from_sim(sim_)),
      history_(config.history_length, sim_.dt) {
  config_.margins.validate();
  config_.weights.validate();
  settings_.sqp_iterations = config_.sqp_iterations;
}

void Navigator::reset() {
  history_ = TrajectoryHistory(config_.history_length, sim_.dt);
  warm_.reset();
}

Perception Navigator::perceive(const WorldState& world) {
  Perception p;
  p.visible = observe(world, sim_);
  history_.update(world, p.visible);
  p.obs = to_robot_frame(world, p.visible);
  if (stack_.coop && stack_.kind != StackKind::NoCoop) {
    const std::vector<double> probs = infer_cooperation(*stack_.coop, history_, p.visible);
    for (std::size_t i = 0; i < p.obs.size(); ++i) p.obs[i].set_coop_prob(probs[i]);
  } else {
    for (auto& o : p.obs) o.set_coop_prob(0.0);
  }
  p.policy_obs = policy_observation(build_graph(history_, world.robot, p.obs));
  return p;
}

int Navigator::choose_horizon(const Perception& p, Rng* rng, double* log_prob, double* value) const {
  if (stack_.kind == StackKind::FixedHorizon) return stack_.fixed_h;
  if (!stack_.needs_policy()) return 0;
  const PolicyOutput out = policy_forward(p.policy_obs, *stack_.policy);
  const int h = (config_.greedy_horizon || !rng) ? greedy_horizon(out.probs) : sample_horizon(out.probs, *rng);
  if (log_prob) *log_prob = std::log(std::max(out.probs(h - 1), 1e-300));
  if (value) *value = out.value;
  return h;
}

Control Navigator::baseline_control(const WorldState& world, const Perception& p) const {
  std::vector<AgentState> neighbors;
  for (int id : p.visible) {
    for (const auto& ped : world.pedestrians) {
      if (ped.id == id) neighbors.push_back(ped);
    }
  }
  const AgentState self = robot_as_agent(world.robot, world.robot.ref_speed);
  if (stack_.kind == StackKind::SfBaseline) {
    const Vec2 desired = social_force_velocity(self, neighbors, sim_.sf, sim_.dt,
                                               world.rng_seed ^ static_cast<std::uint64_t>(world.step_index));
    return inverse_kinematics(world.robot, desired, sim_);
  }
  const Vec2 desired = orca_velocity(self, neighbors, std::nullopt, sim_.orca, sim_.dt);
  Control u = inverse_kinematics(world.robot, desired, sim_);
  const Vec2 forward(std::cos(world.robot.heading), std::sin(world.robot.heading));
  u.v = orca_feasible_speed(u.v, forward, desired, orca_constraints(self, neighbors, std::nullopt, sim_.orca, sim_.dt));
  return u;
}

ControlDecision Navigator::control(const WorldState& world, const Perception& p, int horizon) {
  ControlDecision d;
  if (!stack_.uses_mpc()) {
    d.control = baseline_control(world, p);
    return d;
  }
  d.horizon = horizon;
  try {
    const auto peds = mpc_pedestrians(world.robot, p.obs, sim_.ped_radius);
    const MpcProblem problem = build_mpc(world.robot, peds, horizon, config_.margins, config_.weights, settings_);
    MpcSolution sol = solve_mpc(problem, warm_ ? &*warm_ : nullptr);
    d.mpc_status = sol.status;
    if (config_.on_solve) config_.on_solve(problem, sol);
    d.control = sol.controls.front();
    if (sol.status == MpcStatus::Degraded) {
      d.degraded = true;
      d.note = "mpc qp failure, lattice fallback";
    }
    warm_ = std::move(sol);
  } catch (const std::exception& e) {
    d.degraded = true;
    d.note = std::string("mpc exception: ") + e.what();
    d.control = Control{};
    warm_.reset();
  }
  return d;
}

NavEnv::NavEnv(std::vector<SimConfig> scenarios, std::shared_ptr<const CoopNetParams> coop,
               NavigatorConfig config, RewardCoeffs coeffs, bool no_coop)
    : scenarios_(std::move(scenarios)),
      coop_(std::move(coop)),
      config_(config),
      coeffs_(coeffs),
      no_coop_(no_coop) {
  if (scenarios_.empty()) throw ScenarioError("NavEnv needs at least one scenario");
  if (!no_coop_ && !coop_) throw ScenarioError("NavEnv needs coop-net parameters unless no_coop is set");
  config_.h_max = coeffs_.h_max;
}

PolicyObservation NavEnv::reset(std::uint64_t seed) {
  const SimConfig& sim = scenarios_[seed % scenarios_.size()];
  // The trainer supplies the horizon; the stack only decides cooperation inputs.
  PolicyStack stack;
  stack.kind = no_coop_ ? StackKind::NoCoop : StackKind::FixedHorizon;
  stack.coop = no_coop_ ? nullptr : coop_;
  nav_ = std::make_unique<Navigator>(sim, stack, config_);
  world_ = spawn_scenario(sim, seed);
  perception_ = nav_->perceive(world_);
  return perception_.policy_obs;
}

HorizonEnv::Step NavEnv::step(int horizon) {
  if (!nav_) throw ScenarioError("NavEnv::step before reset");
  const SimConfig& sim = nav_->sim();
  ControlDecision d = nav_->control(world_, perception_, horizon);
  if (d.degraded) {
    // MPC failure: a zero-control step that still earns its reward
    d.control = Control{};
    ++mpc_failures_;
  }
  const WorldState prev = world_;
  world_ = step_world(world_, d.control, sim);
  const Outcome outcome = classify_outcome(world_, sim);
  Step s;
  s.reward = compute_reward(prev, world_, sim.clamp(d.control), horizon, perception_.obs, outcome, coeffs_);
  s.done = outcome != Outcome::Running;
  if (!s.done) {
    perception_ = nav_->perceive(world_);
    s.obs = perception_.policy_obs;
  }
  return s;
}

}  // namespace hnav
