#ifndef HNAV_WORLD_HPP
#define HNAV_WORLD_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hnav/common.hpp"

namespace hnav {

enum class Behavior { Cooperative, NonCooperative };
enum class PedController { Orca, SocialForce };

struct AgentState {
  Vec2 position = Vec2::Zero();
  Vec2 velocity = Vec2::Zero();
  double radius = 0.3;
  Vec2 goal = Vec2::Zero();
  double pref_speed = 1.0;
  Behavior behavior = Behavior::NonCooperative;
  PedController controller = PedController::Orca;
  int id = 0;
};

struct RobotState {
  Vec2 position = Vec2::Zero();
  double heading = 0.0;  // (-pi, pi]
  Vec2 velocity = Vec2::Zero();
  Vec2 goal = Vec2::Zero();
  double ref_speed = 1.0;
  double radius = 0.3;
  double forward_speed = 0.0;  // last applied v
};

struct Control {
  double v = 0.0;  // forward speed, m/s
  double w = 0.0;  // yaw rate, rad/s
};

struct OrcaParams {
  double neighbor_dist = 5.0;
  double time_horizon = 2.0;
  int max_neighbors = 10;
};

struct SocialForceParams {
  double A = 2.0;
  double B = 0.35;
  double relaxation_time = 0.5;
};

struct SimConfig {
  double dt = 0.25;
  double arena_spawn_radius = 6.0;
  int n_cooperative = 5;
  int n_noncooperative = 15;
  double robot_radius = 0.3;
  double ped_radius = 0.3;
  double v_min = -0.5;
  double v_max = 1.0;
  double w_max = 1.0;
  double v_ref = 1.0;
  double ped_pref_speed = 1.0;
  double timeout = 30.0;
  double sensing_range = 5.0;
  double goal_tolerance = 0.3;
  bool recycle_goals = true;
  PedController ped_controller = PedController::Orca;
  OrcaParams orca;
  SocialForceParams sf;

  /// Throws std::invalid_argument on an inconsistent configuration.
  void validate() const;
  Control clamp(const Control& u) const;
};

struct WorldState {
  RobotState robot;
  std::vector<AgentState> pedestrians;
  double time = 0.0;
  std::int64_t step_index = 0;
  std::uint64_t rng_seed = 0;
};

/// Scenario presets keyed "low" / "mid" / "high" (cooperative/non-cooperative
/// counts 0/20, 5/15, 10/10). Throws std::invalid_argument for other names.
SimConfig scenario_preset(const std::string& name);

WorldState spawn_scenario(const SimConfig& config, std::uint64_t seed);

RobotState unicycle_step(const RobotState& state, const Control& u, double dt);

/// Half-plane of permitted velocities: the side to the left of `direction`
/// through `point`.
struct OrcaHalfPlane {
  Vec2 point = Vec2::Zero();
  Vec2 direction = Vec2::UnitX();
  bool contains(const Vec2& v, double tol = 1e-9) const { return cross2(direction, Vec2(point - v)) <= tol; }
};

/// Reciprocal constraints of `agent` against its nearest neighbors (robot
/// included for Cooperative agents), as used by orca_velocity.
std::vector<OrcaHalfPlane> orca_constraints(const AgentState& agent, const std::vector<AgentState>& neighbors,
                                            const std::optional<AgentState>& robot, const OrcaParams& params,
                                            double dt);

/// ORCA velocity for `agent`. The robot (as a disc agent) enters the neighbor
/// set only when the agent is Cooperative.
Vec2 orca_velocity(const AgentState& agent, const std::vector<AgentState>& neighbors,
                   const std::optional<AgentState>& robot, const OrcaParams& params, double dt);

/// Helbing-Molnar social force update. `degenerate_seed` picks the repulsion
/// direction for coincident agents.
Vec2 social_force_velocity(const AgentState& agent, const std::vector<AgentState>& neighbors,
                           const SocialForceParams& params, double dt,
                           std::uint64_t degenerate_seed = 0);

/// Preferred velocity: toward the goal at pref_speed, shortened so as not to
/// overshoot a goal closer than one step.
Vec2 preferred_velocity(const AgentState& agent, double dt);

/// Robot represented as a disc agent (for ORCA neighbor sets and baselines).
AgentState robot_as_agent(const RobotState& robot, double pref_speed);

WorldState step_world(const WorldState& world, const Control& robot_control,
                      const SimConfig& config);

struct CollisionReport {
  int ped_id = -1;
  double penetration_depth = 0.0;
};

std::optional<CollisionReport> detect_collision(const WorldState& world);

}  // namespace hnav

#endif  // HNAV_WORLD_HPP
