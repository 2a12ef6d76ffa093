#include <algorithm>
#include <cmath>
#include <utility>

#include "hnav/world.hpp"

namespace hnav {
namespace {

constexpr double kEpsilon = 1e-9;

using OrcaLine = OrcaHalfPlane;

// Optimizes on line `line_no` subject to lines [0, line_no) and the speed disc.
bool solve_on_line(const std::vector<OrcaLine>& lines, std::size_t line_no, double radius,
                   const Vec2& opt_velocity, bool direction_opt, Vec2& result) {
  const OrcaLine& line = lines[line_no];
  const double dot = line.point.dot(line.direction);
  const double discriminant = dot * dot + radius * radius - line.point.squaredNorm();
  if (discriminant < 0.0) return false;

  const double sqrt_disc = std::sqrt(discriminant);
  double t_left = -dot - sqrt_disc;
  double t_right = -dot + sqrt_disc;

  for (std::size_t i = 0; i < line_no; ++i) {
    const double denominator = cross2(line.direction, lines[i].direction);
    const double numerator = cross2(lines[i].direction, Vec2(line.point - lines[i].point));
    if (std::abs(denominator) <= kEpsilon) {
      if (numerator < 0.0) return false;
      continue;
    }
    const double t = numerator / denominator;
    if (denominator >= 0.0)
      t_right = std::min(t_right, t);
    else
      t_left = std::max(t_left, t);
    if (t_left > t_right) return false;
  }

  if (direction_opt) {
    result = opt_velocity.dot(line.direction) > 0.0 ? Vec2(line.point + t_right * line.direction)
                                                    : Vec2(line.point + t_left * line.direction);
  } else {
    const double t = std::clamp(line.direction.dot(opt_velocity - line.point), t_left, t_right);
    result = line.point + t * line.direction;
  }
  return true;
}

// Returns the index of the first line that could not be satisfied, or
// lines.size() on success.
std::size_t solve_2d(const std::vector<OrcaLine>& lines, double radius, const Vec2& opt_velocity,
                     bool direction_opt, Vec2& result) {
  if (direction_opt)
    result = opt_velocity * radius;
  else if (opt_velocity.squaredNorm() > radius * radius)
    result = opt_velocity.normalized() * radius;
  else
    result = opt_velocity;

  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (cross2(lines[i].direction, Vec2(lines[i].point - result)) > 0.0) {
      const Vec2 previous = result;
      if (!solve_on_line(lines, i, radius, opt_velocity, direction_opt, result)) {
        result = previous;
        return i;
      }
    }
  }
  return lines.size();
}

// Infeasible case: minimizes the maximum violation over all lines (the 3-D
// linear program of ORCA, solved by projection onto each violated line).
void solve_3d(const std::vector<OrcaLine>& lines, std::size_t begin_line, double radius,
              Vec2& result) {
  double distance = 0.0;
  for (std::size_t i = begin_line; i < lines.size(); ++i) {
    if (cross2(lines[i].direction, Vec2(lines[i].point - result)) <= distance) continue;

    std::vector<OrcaLine> projected;
    for (std::size_t j = 0; j < i; ++j) {
      OrcaLine line;
      const double determinant = cross2(lines[i].direction, lines[j].direction);
      if (std::abs(determinant) <= kEpsilon) {
        if (lines[i].direction.dot(lines[j].direction) > 0.0) continue;
        line.point = 0.5 * (lines[i].point + lines[j].point);
      } else {
        line.point = lines[i].point +
                     (cross2(lines[j].direction, Vec2(lines[i].point - lines[j].point)) /
                      determinant) *
                         lines[i].direction;
      }
      line.direction = (lines[j].direction - lines[i].direction).normalized();
      projected.push_back(line);
    }

    const Vec2 previous = result;
    const Vec2 normal(-lines[i].direction.y(), lines[i].direction.x());
    if (solve_2d(projected, radius, normal, true, result) < projected.size()) {
      // Numerical failure only; the previous result is already feasible here.
      result = previous;
    }
    distance = cross2(lines[i].direction, Vec2(lines[i].point - result));
  }
}

OrcaLine orca_line(const AgentState& self, const AgentState& other, double inv_horizon,
                   double dt) {
  const Vec2 rel_position = other.position - self.position;
  const Vec2 rel_velocity = self.velocity - other.velocity;
  const double dist_sq = rel_position.squaredNorm();
  const double combined_radius = self.radius + other.radius;
  const double combined_radius_sq = combined_radius * combined_radius;

  OrcaLine line;
  Vec2 u;
  if (dist_sq > combined_radius_sq) {
    const Vec2 w = rel_velocity - inv_horizon * rel_position;
    const double w_length_sq = w.squaredNorm();
    const double dot = w.dot(rel_position);

    if (dot < 0.0 && dot * dot > combined_radius_sq * w_length_sq) {
      // Project on the cut-off circle.
      const double w_length = std::sqrt(w_length_sq);
      const Vec2 unit_w = w / w_length;
      line.direction = Vec2(unit_w.y(), -unit_w.x());
      u = (combined_radius * inv_horizon - w_length) * unit_w;
    } else {
      // Project on a leg.
      const double leg = std::sqrt(dist_sq - combined_radius_sq);
      if (cross2(rel_position, w) > 0.0) {
        line.direction = Vec2(rel_position.x() * leg - rel_position.y() * combined_radius,
                              rel_position.x() * combined_radius + rel_position.y() * leg) /
                         dist_sq;
      } else {
        line.direction = -Vec2(rel_position.x() * leg + rel_position.y() * combined_radius,
                               -rel_position.x() * combined_radius + rel_position.y() * leg) /
                         dist_sq;
      }
      u = rel_velocity.dot(line.direction) * line.direction - rel_velocity;
    }
  } else {
    // Already overlapping: resolve within one time step.
    const double inv_dt = 1.0 / dt;
    Vec2 w = rel_velocity - inv_dt * rel_position;
    double w_length = w.norm();
    if (w_length < kEpsilon) {
      w = Vec2(1.0, 0.0);
      w_length = kEpsilon;
    }
    const Vec2 unit_w = w / w_length;
    line.direction = Vec2(unit_w.y(), -unit_w.x());
    u = (combined_radius * inv_dt - w_length) * unit_w;
  }
  line.point = self.velocity + 0.5 * u;
  return line;
}

}  // namespace

std::vector<OrcaHalfPlane> orca_constraints(const AgentState& agent, const std::vector<AgentState>& neighbors,
                                            const std::optional<AgentState>& robot, const OrcaParams& params,
                                            double dt) {
  std::vector<std::pair<double, const AgentState*>> candidates;
  const double range_sq = params.neighbor_dist * params.neighbor_dist;
  for (const auto& n : neighbors) {
    if (n.id == agent.id) continue;
    const double d2 = (n.position - agent.position).squaredNorm();
    if (d2 <= range_sq) candidates.emplace_back(d2, &n);
  }
  if (robot && agent.behavior == Behavior::Cooperative) {
    const double d2 = (robot->position - agent.position).squaredNorm();
    if (d2 <= range_sq) candidates.emplace_back(d2, &*robot);
  }
  // Nearest first; ties by id keep the ordering independent of input order.
  std::stable_sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return a.second->id < b.second->id;
  });
  if (static_cast<int>(candidates.size()) > params.max_neighbors)
    candidates.resize(static_cast<std::size_t>(std::max(params.max_neighbors, 0)));

  std::vector<OrcaHalfPlane> lines;
  lines.reserve(candidates.size());
  const double inv_horizon = 1.0 / params.time_horizon;
  for (const auto& [d2, other] : candidates) lines.push_back(orca_line(agent, *other, inv_horizon, dt));
  return lines;
}

Vec2 orca_velocity(const AgentState& agent, const std::vector<AgentState>& neighbors,
                   const std::optional<AgentState>& robot, const OrcaParams& params, double dt) {
  const std::vector<OrcaHalfPlane> lines = orca_constraints(agent, neighbors, robot, params, dt);
  const Vec2 pref = preferred_velocity(agent, dt);
  Vec2 result = Vec2::Zero();
  const std::size_t fail = solve_2d(lines, agent.pref_speed, pref, false, result);
  if (fail < lines.size()) solve_3d(lines, fail, agent.pref_speed, result);

  const double speed = result.norm();
  if (speed > agent.pref_speed) result *= agent.pref_speed / speed;
  return result;
}

}  // namespace hnav
