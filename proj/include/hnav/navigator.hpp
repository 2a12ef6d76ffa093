#ifndef HNAV_NAVIGATOR_HPP
#define HNAV_NAVIGATOR_HPP

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hnav/coop_net.hpp"
#include "hnav/mpc.hpp"
#include "hnav/policy.hpp"
#include "hnav/sensing.hpp"
#include "hnav/world.hpp"

namespace hnav {

enum class StackKind { Full, FixedHorizon, NoCoop, OrcaBaseline, SfBaseline };

/// Which controller drives the robot, with the learned parameters it needs.
struct PolicyStack {
  StackKind kind = StackKind::Full;
  int fixed_h = 5;
  std::shared_ptr<const CoopNetParams> coop;
  std::shared_ptr<const PolicyParams> policy;

  /// "full", "fixed-<h>", "nocoop", "orca" or "sf". Throws std::invalid_argument.
  static PolicyStack parse(const std::string& name);
  std::string name() const;

  bool needs_coop() const { return kind == StackKind::Full || kind == StackKind::FixedHorizon; }
  bool needs_policy() const { return kind == StackKind::Full || kind == StackKind::NoCoop; }
  bool uses_mpc() const { return kind != StackKind::OrcaBaseline && kind != StackKind::SfBaseline; }

  /// Throws ScenarioError when required parameters are missing or h is out of range.
  void validate(int h_max) const;
};

struct NavigatorConfig {
  SafetyMargins margins;
  MpcWeights weights;
  int sqp_iterations = 5;
  int history_length = 8;
  int h_max = 10;
  /// Full/NoCoop pick the most likely horizon; otherwise they sample it.
  bool greedy_horizon = true;
  /// Called after every MPC solve (debug dumps).
  std::function<void(const MpcProblem&, const MpcSolution&)> on_solve;
};

/// What the robot knows at one step.
struct Perception {
  std::vector<int> visible;
  std::vector<PedestrianObservation> obs;  // robot frame, with cooperation estimates
  PolicyObservation policy_obs;
};

struct ControlDecision {
  Control control;
  int horizon = 0;  // 0 for the reactive baselines
  std::optional<MpcStatus> mpc_status;
  bool degraded = false;
  std::string note;
};

/// Runs sense -> cooperation inference -> horizon -> control for one robot.
/// Keeps the trajectory history and the MPC warm start between steps. The
/// stack is not validated here; episode runners call PolicyStack::validate.
class Navigator {
 public:
  Navigator(SimConfig sim, PolicyStack stack, NavigatorConfig config);

  void reset();

  /// Must be called exactly once per world state, in order.
  Perception perceive(const WorldState& world);

  /// Horizon from the stack: fixed, or chosen by the policy (rng used when sampling).
  int choose_horizon(const Perception& p, Rng* rng, double* log_prob = nullptr,
                     double* value = nullptr) const;

  /// Control for the given horizon (ignored by the baselines).
  ControlDecision control(const WorldState& world, const Perception& p, int horizon);

  const PolicyStack& stack() const { return stack_; }
  const NavigatorConfig& config() const { return config_; }
  const SimConfig& sim() const { return sim_; }

 private:
  Control baseline_control(const WorldState& world, const Perception& p) const;

  SimConfig sim_;
  PolicyStack stack_;
  NavigatorConfig config_;
  MpcSettings settings_;
  TrajectoryHistory history_;
  std::optional<MpcSolution> warm_;
};

/// Nearest feasible unicycle command for a desired holonomic velocity: the
/// forward speed is the projection on the current heading, the yaw rate turns
/// toward the desired direction within one step.
Control inverse_kinematics(const RobotState& robot, const Vec2& desired, const SimConfig& sim);

/// Forward speed closest to `v` between 0 and v whose realized velocity
/// v * forward satisfies every constraint that `desired` satisfies; 0 when
/// no such speed exists.
double orca_feasible_speed(double v, const Vec2& forward, const Vec2& desired,
                           const std::vector<OrcaHalfPlane>& constraints);

/// Episode outcome after a world step: collision, then goal, then timeout.
Outcome classify_outcome(const WorldState& world, const SimConfig& sim);

/// Training environment for the horizon policy: a full navigation stack
/// whose horizon is the action. reset(seed) uses scenarios[seed % size].
class NavEnv : public HorizonEnv {
 public:
  NavEnv(std::vector<SimConfig> scenarios, std::shared_ptr<const CoopNetParams> coop,
         NavigatorConfig config, RewardCoeffs coeffs, bool no_coop = false);

  PolicyObservation reset(std::uint64_t seed) override;
  Step step(int horizon) override;

  int mpc_failures() const { return mpc_failures_; }

 private:
  std::vector<SimConfig> scenarios_;
  std::shared_ptr<const CoopNetParams> coop_;
  NavigatorConfig config_;
  RewardCoeffs coeffs_;
  bool no_coop_;
  std::unique_ptr<Navigator> nav_;
  WorldState world_;
  Perception perception_;
  int mpc_failures_ = 0;
};

}  // namespace hnav

#endif  // HNAV_NAVIGATOR_HPP
