#include <cmath>

#include "hnav/policy.hpp"

namespace hnav {

const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::Running: return "running";
    case Outcome::Success: return "success";
    case Outcome::Collision: return "collision";
    case Outcome::Timeout: return "timeout";
  }
  return "unknown";
}

double non_coop_fraction(const std::vector<PedestrianObservation>& visible) {
  if (visible.empty()) return 0.0;
  int n = 0;
  for (const auto& o : visible) n += o.coop_label == 0;
  return static_cast<double>(n) / static_cast<double>(visible.size());
}

RewardBreakdown compute_reward(const WorldState& prev_world, const WorldState& world,
                               const Control& u, int h,
                               const std::vector<PedestrianObservation>& visible,
                               Outcome outcome, const RewardCoeffs& c) {
  RewardBreakdown r;
  if (outcome == Outcome::Success) r.r_term = c.goal_reward;
  else if (outcome == Outcome::Collision || outcome == Outcome::Timeout) r.r_term = c.failure_reward;

  const double phi_prev = (prev_world.robot.position - prev_world.robot.goal).norm();
  const double phi = (world.robot.position - world.robot.goal).norm();
  r.r_pot = -c.lambda_pot * (phi - phi_prev);
  r.r_kin = -c.lambda_r * u.w * u.w - c.lambda_v * std::max(0.0, -u.v);
  r.r_horizon = -c.lambda_h * static_cast<double>(c.h_max - h);

  const double rho = non_coop_fraction(visible);
  const double hd = static_cast<double>(h);
  r.r_vis_social = rho > 0.5 ? c.lambda_high * std::pow(hd, c.eta_high) * rho
                             : c.lambda_low * std::pow(hd, c.eta_low) * (1.0 - rho);
  r.r_total = r.r_term + r.r_pot + r.r_kin + r.r_horizon + r.r_vis_social;
  return r;
}

}  // namespace hnav
