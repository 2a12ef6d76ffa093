#include <cmath>
#include <numbers>

#include "hnav/world.hpp"

namespace hnav {

Vec2 social_force_velocity(const AgentState& agent, const std::vector<AgentState>& neighbors,
                           const SocialForceParams& params, double dt,
                           std::uint64_t degenerate_seed) {
  const Vec2 pref = preferred_velocity(agent, dt);
  Vec2 force = (pref - agent.velocity) / params.relaxation_time;

  for (const auto& other : neighbors) {
    if (other.id == agent.id) continue;
    Vec2 away = agent.position - other.position;
    const double dist = away.norm();
    if (dist > 0.0) {
      away /= dist;
    } else {
      Rng rng(degenerate_seed ^ (static_cast<std::uint64_t>(other.id + 1) * 0x9E3779B97F4A7C15ULL));
      const double angle = rng.uniform(-std::numbers::pi, std::numbers::pi);
      away = Vec2(std::cos(angle), std::sin(angle));
    }
    force += params.A * std::exp((agent.radius + other.radius - dist) / params.B) * away;
  }

  // Unit mass.
  Vec2 v = agent.velocity + dt * force;
  const double speed = v.norm();
  if (speed > agent.pref_speed) v *= agent.pref_speed / speed;
  return v;
}

}  // namespace hnav
