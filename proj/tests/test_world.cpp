#include <algorithm>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "hnav/world.hpp"

using namespace hnav;

namespace {

AgentState make_agent(int id, Vec2 pos, Vec2 goal, Behavior behavior = Behavior::NonCooperative) {
  AgentState a;
  a.id = id;
  a.position = pos;
  a.goal = goal;
  a.behavior = behavior;
  return a;
}

// Independent angle wrap: shift by whole turns until inside (-pi, pi].
double wrap_oracle(double a) {
  while (a > std::numbers::pi) a -= 2.0 * std::numbers::pi;
  while (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

// Truncated velocity obstacle membership: some t in (0, tau] brings the
// relative displacement within the combined radius.
bool in_vo(const Vec2& v, const Vec2& rel_pos, double radius, double tau) {
  const double vv = v.squaredNorm();
  double t = vv > 0.0 ? v.dot(rel_pos) / vv : tau;
  t = std::clamp(t, 1e-9, tau);
  return (v * t - rel_pos).norm() < radius;
}

// Brute-force ORCA for agent A against B: nearest VO-boundary point by grid
// (ties broken toward the right of the relative position), half-plane through
// v_A + u/2, then the disc point closest to the preferred velocity by grid.
Vec2 orca_oracle(const AgentState& a, const AgentState& b, double tau) {
  const Vec2 rel_pos = b.position - a.position;
  const Vec2 rel_vel = a.velocity - b.velocity;
  const double radius = a.radius + b.radius;
  const double h = 0.004;
  // Nearest non-member on each side of the relative position; near-ties go right.
  Vec2 best_side[2] = {rel_vel, rel_vel};
  double best_d[2] = {1e9, 1e9};
  for (double x = -3.0; x <= 3.0; x += h) {
    for (double y = -3.0; y <= 3.0; y += h) {
      const Vec2 v(x, y);
      if (in_vo(v, rel_pos, radius, tau)) continue;
      const double d = (v - rel_vel).norm();
      const int side = cross2<double>(rel_pos, v) < 0.0 ? 0 : 1;
      if (d < best_d[side]) {
        best_d[side] = d;
        best_side[side] = v;
      }
    }
  }
  const Vec2 best = best_d[0] <= best_d[1] + 2.0 * h ? best_side[0] : best_side[1];
  const Vec2 u = best - rel_vel;
  const Vec2 n = u.normalized();
  const Vec2 anchor = a.velocity + 0.5 * u;
  const Vec2 pref = preferred_velocity(a, 0.25);
  Vec2 sol = Vec2::Zero();
  double sol_d = 1e9;
  const double g = 0.002;
  for (double x = -a.pref_speed; x <= a.pref_speed; x += g) {
    for (double y = -a.pref_speed; y <= a.pref_speed; y += g) {
      const Vec2 v(x, y);
      if (v.norm() > a.pref_speed || (v - anchor).dot(n) < 0.0) continue;
      const double d = (v - pref).norm();
      if (d < sol_d) {
        sol_d = d;
        sol = v;
      }
    }
  }
  return sol;
}

}  // namespace

TEST_CASE("spawn_scenario: empty crowd puts the goal antipodal") {
  SimConfig config;
  config.n_cooperative = 0;
  config.n_noncooperative = 0;
  const WorldState w = spawn_scenario(config, 7);
  CHECK(w.pedestrians.empty());
  CHECK((w.robot.goal - w.robot.position).norm() == doctest::Approx(2.0 * config.arena_spawn_radius));
}

TEST_CASE("spawn_scenario: mid preset composition and spacing") {
  const SimConfig config = scenario_preset("mid");
  const WorldState w = spawn_scenario(config, 11);
  REQUIRE(w.pedestrians.size() == 20);
  const auto coop = std::count_if(w.pedestrians.begin(), w.pedestrians.end(),
                                  [](const AgentState& a) { return a.behavior == Behavior::Cooperative; });
  CHECK(coop == 5);
  for (std::size_t i = 0; i < w.pedestrians.size(); ++i) {
    CHECK((w.pedestrians[i].position - w.robot.position).norm() >= 0.8 - 1e-12);
    for (std::size_t j = i + 1; j < w.pedestrians.size(); ++j)
      CHECK((w.pedestrians[i].position - w.pedestrians[j].position).norm() >= 0.8 - 1e-12);
  }
}

TEST_CASE("spawn_scenario: deterministic and fails on over-dense configs") {
  const SimConfig config = scenario_preset("high");
  const WorldState a = spawn_scenario(config, 3), b = spawn_scenario(config, 3);
  for (std::size_t i = 0; i < a.pedestrians.size(); ++i) {
    CHECK(a.pedestrians[i].position == b.pedestrians[i].position);
    CHECK(a.pedestrians[i].goal == b.pedestrians[i].goal);
  }
  SimConfig dense;
  dense.arena_spawn_radius = 1.0;
  dense.n_noncooperative = 60;
  dense.n_cooperative = 0;
  CHECK_THROWS_AS(spawn_scenario(dense, 1), ScenarioError);
}

TEST_CASE("unicycle_step integration") {
  RobotState s;
  RobotState n = unicycle_step(s, {1.0, 0.0}, 0.25);
  CHECK(n.position.x() == doctest::Approx(0.25));
  CHECK(n.position.y() == doctest::Approx(0.0));
  CHECK(n.heading == 0.0);

  n = unicycle_step(s, {0.0, 1.0}, 0.25);
  CHECK(n.position == s.position);
  CHECK(n.heading == doctest::Approx(0.25));

  s.heading = std::numbers::pi - 0.1;
  n = unicycle_step(s, {0.0, 1.0}, 0.25);
  CHECK(n.heading == doctest::Approx(wrap_oracle(std::numbers::pi - 0.1 + 0.25)));
  CHECK(n.heading > -std::numbers::pi);
  CHECK(n.heading <= std::numbers::pi);

  n = unicycle_step(s, {0.7, 0.3}, 0.25);
  CHECK(n.velocity.x() == doctest::Approx(0.7 * std::cos(n.heading)));
  CHECK(n.velocity.y() == doctest::Approx(0.7 * std::sin(n.heading)));
}

TEST_CASE("wrap_angle agrees with the loop oracle") {
  for (double a = -20.0; a <= 20.0; a += 0.137) CHECK(wrap_angle(a) == doctest::Approx(wrap_oracle(a)));
  CHECK(wrap_angle(std::numbers::pi) == doctest::Approx(std::numbers::pi));
  CHECK(wrap_angle(-std::numbers::pi) == doctest::Approx(std::numbers::pi));
}

TEST_CASE("orca_velocity: unconstrained agent takes its preferred velocity") {
  const AgentState a = make_agent(0, {0, 0}, {5, 0});
  const Vec2 v = orca_velocity(a, {}, std::nullopt, OrcaParams{}, 0.25);
  CHECK(v.x() == doctest::Approx(1.0));
  CHECK(v.y() == doctest::Approx(0.0));
}

TEST_CASE("orca_velocity: non-cooperative agents ignore the robot") {
  const AgentState a = make_agent(0, {0, 0}, {5, 0}, Behavior::NonCooperative);
  RobotState robot;
  robot.position = {0.5 + 0.6, 0.0};
  robot.velocity = {-1.0, 0.0};
  const Vec2 v = orca_velocity(a, {}, robot_as_agent(robot, 1.0), OrcaParams{}, 0.25);
  CHECK(v.x() == doctest::Approx(1.0));
  CHECK(v.y() == doctest::Approx(0.0));

  AgentState c = a;
  c.behavior = Behavior::Cooperative;
  const Vec2 vc = orca_velocity(c, {}, robot_as_agent(robot, 1.0), OrcaParams{}, 0.25);
  CHECK((vc - Vec2(1.0, 0.0)).norm() > 0.1);
}

TEST_CASE("orca_velocity: head-on pair matches the brute-force oracle") {
  AgentState a = make_agent(0, {-1.5, 0}, {6, 0});
  AgentState b = make_agent(1, {1.5, 0}, {-6, 0});
  a.velocity = {1.0, 0.0};
  b.velocity = {-1.0, 0.0};
  OrcaParams params;
  const Vec2 va = orca_velocity(a, {a, b}, std::nullopt, params, 0.25);
  const Vec2 vb = orca_velocity(b, {a, b}, std::nullopt, params, 0.25);
  CHECK(std::abs(va.y()) > 0.05);
  CHECK(va.y() == doctest::Approx(-vb.y()).epsilon(1e-9));
  CHECK(va.x() == doctest::Approx(-vb.x()).epsilon(1e-9));
  // Right-hand rule: A heads +x and dodges to -y.
  CHECK(va.y() < 0.0);

  const Vec2 oracle_a = orca_oracle(a, b, params.time_horizon);
  const Vec2 oracle_b = orca_oracle(b, a, params.time_horizon);
  CHECK((va - oracle_a).norm() < 0.02);
  CHECK((vb - oracle_b).norm() < 0.02);
}

TEST_CASE("orca_velocity: oblique encounter matches the oracle") {
  AgentState a = make_agent(0, {0, 0}, {6, 1});
  AgentState b = make_agent(1, {2.5, 1.0}, {-4, -1});
  a.velocity = {0.9, 0.1};
  b.velocity = {-0.8, -0.3};
  const Vec2 va = orca_velocity(a, {a, b}, std::nullopt, OrcaParams{}, 0.25);
  CHECK((va - orca_oracle(a, b, 2.0)).norm() < 0.02);
}

TEST_CASE("social_force_velocity closed forms") {
  SocialForceParams sf;
  AgentState a = make_agent(0, {0, 0}, {10, 0});
  a.velocity = {1.0, 0.0};
  Vec2 v = social_force_velocity(a, {}, sf, 0.25);
  CHECK(v.x() == doctest::Approx(1.0));
  CHECK(v.y() == doctest::Approx(0.0));

  a.velocity = Vec2::Zero();
  v = social_force_velocity(a, {}, sf, 0.25);
  CHECK(v.x() == doctest::Approx(std::min(0.25 * 1.0 / sf.relaxation_time, 1.0)));

  // Repulsion magnitude A e^{-1} at distance r_i + r_j + B.
  a.velocity = {1.0, 0.0};
  a.pref_speed = 100.0;
  a.goal = a.position + Vec2(1000.0, 0.0);
  a.velocity = preferred_velocity(a, 0.25);
  AgentState b = make_agent(1, {0.0, -(0.6 + sf.B)}, {0, -10});
  v = social_force_velocity(a, {b}, sf, 0.25);
  const Vec2 delta = (v - a.velocity) / 0.25;
  CHECK(delta.norm() == doctest::Approx(sf.A * std::exp(-1.0)));
  CHECK(delta.y() > 0.0);
}

TEST_CASE("social_force_velocity: coincident agents repel deterministically") {
  SocialForceParams sf;
  AgentState a = make_agent(0, {0, 0}, {10, 0});
  AgentState b = make_agent(1, {0, 0}, {-10, 0});
  const Vec2 v1 = social_force_velocity(a, {b}, sf, 0.25, 42);
  const Vec2 v2 = social_force_velocity(a, {b}, sf, 0.25, 42);
  CHECK(v1 == v2);
  CHECK(v1.allFinite());
}

TEST_CASE("step_world: empty world advances only the robot") {
  SimConfig config;
  config.n_cooperative = config.n_noncooperative = 0;
  WorldState w = spawn_scenario(config, 1);
  const Vec2 start = w.robot.position;
  w = step_world(w, {1.0, 0.0}, config);
  CHECK((w.robot.position - start).norm() == doctest::Approx(0.25));
  CHECK(w.step_index == 1);
  CHECK(w.time == 0.25);
  for (int k = 0; k < 7; ++k) w = step_world(w, {1.0, 0.0}, config);
  CHECK(w.time == 8 * 0.25);
}

TEST_CASE("step_world: simultaneous update reads the pre-step snapshot") {
  SimConfig config;
  config.n_cooperative = config.n_noncooperative = 0;
  WorldState w = spawn_scenario(config, 1);
  w.robot.position = {50, 50};
  w.pedestrians = {make_agent(0, {0, 0}, {5, 0}), make_agent(1, {1.2, 0.3}, {-5, 0.3})};
  const WorldState next = step_world(w, {}, config);
  // Had A been moved first, B would have reacted to A's new position.
  WorldState sequential = w;
  sequential.pedestrians[0] = next.pedestrians[0];
  const WorldState seq_next = step_world(sequential, {}, config);
  CHECK((next.pedestrians[1].velocity - seq_next.pedestrians[1].velocity).norm() > 1e-6);
  WorldState swapped = w;
  std::swap(swapped.pedestrians[0], swapped.pedestrians[1]);
  const WorldState swapped_next = step_world(swapped, {}, config);
  CHECK((next.pedestrians[1].velocity - swapped_next.pedestrians[0].velocity).norm() < 1e-12);
}

TEST_CASE("step_world: speed caps, determinism, and permutation invariance") {
  const SimConfig config = scenario_preset("high");
  WorldState a = spawn_scenario(config, 5);
  WorldState b = a;
  std::reverse(b.pedestrians.begin(), b.pedestrians.end());
  WorldState a2 = a;
  for (int k = 0; k < 60; ++k) {
    const Control u{0.8, 0.3 * std::sin(0.1 * k)};
    a = step_world(a, u, config);
    a2 = step_world(a2, u, config);
    b = step_world(b, u, config);
    for (const auto& p : a.pedestrians) CHECK(p.velocity.norm() <= p.pref_speed + 1e-9);
    CHECK(std::abs(a.robot.forward_speed) <= config.v_max);
  }
  for (std::size_t i = 0; i < a.pedestrians.size(); ++i) {
    CHECK(a.pedestrians[i].position == a2.pedestrians[i].position);
    const auto& pb = b.pedestrians[b.pedestrians.size() - 1 - i];
    CHECK(pb.id == a.pedestrians[i].id);
    CHECK((pb.position - a.pedestrians[i].position).norm() < 1e-9);
  }
}

TEST_CASE("ORCA reciprocity: antipodal swap stays collision-free") {
  SimConfig config;
  for (double dist : {4.0, 6.0, 9.0}) {
    for (double angle : {0.0, 0.3, 1.2}) {
      const Vec2 dir(std::cos(angle), std::sin(angle));
      std::vector<AgentState> peds = {make_agent(0, -0.5 * dist * dir, 0.5 * dist * dir, Behavior::Cooperative),
                                      make_agent(1, 0.5 * dist * dir, -0.5 * dist * dir, Behavior::Cooperative)};
      config.recycle_goals = false;
      WorldState w;
      w.robot.position = {100, 100};
      w.pedestrians = peds;
      double min_gap = 1e9;
      for (int k = 0; k < 200; ++k) {
        w = step_world(w, {}, config);
        min_gap = std::min(min_gap, (w.pedestrians[0].position - w.pedestrians[1].position).norm());
      }
      CHECK(min_gap >= 0.6 - 1e-9);
      CHECK((w.pedestrians[0].position - w.pedestrians[0].goal).norm() < 0.3);
    }
  }
}

TEST_CASE("detect_collision") {
  WorldState w;
  w.robot.position = {0, 0};
  w.robot.radius = 0.3;
  w.pedestrians = {make_agent(0, {1, 0}, {})};
  CHECK_FALSE(detect_collision(w).has_value());

  w.pedestrians = {make_agent(0, {0.5, 0}, {})};
  auto c = detect_collision(w);
  REQUIRE(c.has_value());
  CHECK(c->ped_id == 0);
  CHECK(c->penetration_depth == doctest::Approx(0.1));

  w.pedestrians = {make_agent(4, {0.5, 0}, {}), make_agent(2, {-0.5, 0}, {}), make_agent(3, {0.9, 0}, {})};
  c = detect_collision(w);
  REQUIRE(c.has_value());
  CHECK(c->ped_id == 2);
}
