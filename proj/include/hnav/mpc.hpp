#ifndef HNAV_MPC_HPP
#define HNAV_MPC_HPP

#include <optional>
#include <string>
#include <vector>

#include "hnav/common.hpp"
#include "hnav/sensing.hpp"
#include "hnav/world.hpp"

namespace hnav {

struct SafetyMargins {
  double d_0 = 0.1;
  double d_coop = 0.1;
  double d_noncoop = 0.4;
  double gamma = 0.3;

  void validate() const;
  double d_safety(int coop_label) const {
    return d_0 + (coop_label ? d_coop : d_noncoop);
  }
};

struct MpcWeights {
  Eigen::Matrix3d Q = Eigen::Vector3d(1.0, 1.0, 0.1).asDiagonal();
  Eigen::Matrix3d Q_f = 5.0 * Eigen::Vector3d(1.0, 1.0, 0.1).asDiagonal().toDenseMatrix();
  Eigen::Matrix2d R = Eigen::Vector2d(0.1, 0.05).asDiagonal();
  double eta = 1.0;
  double sigma_coop = 0.6;
  double sigma_noncoop = 1.2;
  double rho_s = 1e4;       // quadratic slack penalty
  double rho_s_lin = 1e3;   // linear slack penalty (exact-penalty part)

  void validate() const;
};

struct MpcSettings {
  double dt = 0.25;
  double v_min = -0.5;
  double v_max = 1.0;
  double w_max = 1.0;
  double robot_radius = 0.3;
  double arena_half_extent = 7.0;  // state box: spawn radius + 1 m
  int sqp_iterations = 5;
  double trust_region = 0.5;
  double trust_shrink = 0.5;
  double step_tolerance = 1e-4;
  double slack_tolerance = 1e-6;
  int lattice_size = 9;

  static MpcSettings from_sim(const SimConfig& config);
};

/// World-frame pedestrian as the planner sees it.
struct MpcPedestrian {
  int id = 0;
  Vec2 position = Vec2::Zero();
  Vec2 velocity = Vec2::Zero();
  double radius = 0.3;
  double coop_prob = 0.0;
  int coop_label = 0;
};

struct MpcProblem {
  Vec3 x0 = Vec3::Zero();  // (px, py, heading)
  Vec2 goal = Vec2::Zero();
  double goal_heading = 0.0;
  int h = 1;
  std::vector<MpcPedestrian> peds;
  SafetyMargins margins;
  MpcWeights weights;
  MpcSettings settings;
  /// predicted[i][k] = p_i + k dt v_i for k = 0..h.
  std::vector<std::vector<Vec2>> predicted;

  int num_barrier_constraints() const { return static_cast<int>(peds.size()) * h; }
  int num_stage_costs() const { return h; }
};

enum class MpcStatus { Optimal, SlackActive, Degraded };

const char* mpc_status_name(MpcStatus s);

struct MpcSolution {
  std::vector<Control> controls;  // u_0..u_{h-1}
  std::vector<Vec3> states;       // x_1..x_h
  Mat barrier;                    // peds x (h+1): h^i(x_k), k = 0..h
  Mat slack;                      // peds x h: max(0, -(h_{k+1} - (1-gamma) h_k))
  double cost = 0.0;              // nonlinear objective, without slack penalty
  double merit = 0.0;             // cost plus slack penalty
  int sqp_iterations = 0;
  MpcStatus status = MpcStatus::Optimal;
  std::vector<double> merit_history;  // merit of each accepted iterate, first entry the initial guess
};

/// p_i + k dt v_i for k = 1..h.
std::vector<Vec2> project_pedestrian(const Vec2& position, const Vec2& velocity, int h, double dt);

double barrier_value(const Vec2& p_r, const Vec2& p_i, double r_r, double r_i, int coop_label,
                     const SafetyMargins& margins);

/// Expected social cost over the cooperation probability.
double social_cost(const Vec2& p_r, const Vec2& p_i, double coop_prob, const MpcWeights& weights);

/// Visible observations (robot frame) back to world-frame planner inputs.
std::vector<MpcPedestrian> mpc_pedestrians(const RobotState& robot,
                                           const std::vector<PedestrianObservation>& obs,
                                           double ped_radius);

MpcProblem build_mpc(const RobotState& robot, const std::vector<MpcPedestrian>& peds, int h,
                     const SafetyMargins& margins = {}, const MpcWeights& weights = {},
                     const MpcSettings& settings = {});

std::vector<Vec3> rollout_unicycle(const Vec3& x0, const std::vector<Control>& controls, double dt);

/// Nonlinear objective of a control sequence (no slack penalty).
double mpc_cost(const MpcProblem& problem, const std::vector<Control>& controls);

/// DTCBF residuals h_{k+1} - (1 - gamma) h_k, peds x h.
Mat barrier_residuals(const MpcProblem& problem, const std::vector<Control>& controls);

/// Objective plus slack penalty at the minimal slacks.
double mpc_merit(const MpcProblem& problem, const std::vector<Control>& controls);

/// Deterministic lattice of constant control sequences: lattice_size values of
/// v in [v_min, v_max] times lattice_size values of w in [-w_max, w_max].
std::vector<Control> control_lattice(const MpcSettings& settings);

/// Previous solution shifted one step, padded with its last control and
/// resized to h.
std::vector<Control> shift_warm_start(const MpcSolution& previous, int h);

MpcSolution solve_mpc(const MpcProblem& problem, const MpcSolution* warm_start = nullptr);

/// Trajectories, barrier values, slacks and iterations as a JSON document.
std::string mpc_debug_json(const MpcProblem& problem, const MpcSolution& solution);

}  // namespace hnav

#endif  // HNAV_MPC_HPP
