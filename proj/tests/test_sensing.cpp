#include <algorithm>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "hnav/sensing.hpp"

using namespace hnav;

namespace {

AgentState ped_at(int id, Vec2 p, Vec2 v = Vec2::Zero()) {
  AgentState a;
  a.id = id;
  a.position = p;
  a.velocity = v;
  a.goal = p;
  return a;
}

WorldState world_with(std::vector<AgentState> peds) {
  WorldState w;
  w.robot.position = Vec2::Zero();
  w.robot.heading = 0.0;
  w.pedestrians = std::move(peds);
  return w;
}

// Closed-form distance from the line through the origin along +x to a point,
// valid when the point projects inside the segment.
double perpendicular_distance(const Vec2& dir, const Vec2& c) { return std::abs(cross2<double>(dir, c)); }

}  // namespace

TEST_CASE("observe: range limit") {
  SimConfig config;
  CHECK(observe(world_with({ped_at(0, {6.0, 0.0})}), config).empty());
  CHECK(observe(world_with({ped_at(0, {4.99, 0.0})}), config) == std::vector<int>{0});
  CHECK(observe(world_with({}), config).empty());
}

TEST_CASE("observe: hard occlusion along a ray") {
  SimConfig config;
  const WorldState w = world_with({ped_at(0, {4.0, 0.0}), ped_at(1, {2.0, 0.0})});
  CHECK(observe(w, config) == std::vector<int>{1});

  // Offset the near pedestrian until the segment clears its disc.
  const Vec2 dir(1.0, 0.0);
  for (double offset : {0.1, 0.25, 0.29, 0.31, 0.5}) {
    const WorldState w2 = world_with({ped_at(0, {4.0, 0.0}), ped_at(1, {2.0, offset})});
    const bool oracle_occluded = perpendicular_distance(dir, Vec2(2.0, offset)) < 0.3;
    const auto vis = observe(w2, config);
    CHECK((std::find(vis.begin(), vis.end(), 0) == vis.end()) == oracle_occluded);
  }
}

TEST_CASE("observe: removing a pedestrian never shrinks the visible set") {
  SimConfig config = scenario_preset("mid");
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    WorldState w = spawn_scenario(config, seed);
    for (int k = 0; k < 20; ++k) w = step_world(w, {1.0, 0.0}, config);
    const auto full = observe(w, config);
    for (std::size_t removed = 0; removed < w.pedestrians.size(); ++removed) {
      WorldState smaller = w;
      const int removed_id = smaller.pedestrians[removed].id;
      smaller.pedestrians.erase(smaller.pedestrians.begin() + static_cast<long>(removed));
      const auto vis = observe(smaller, config);
      for (int id : full) {
        if (id == removed_id) continue;
        CHECK(std::binary_search(vis.begin(), vis.end(), id));
      }
    }
  }
}

TEST_CASE("to_robot_frame") {
  WorldState w = world_with({ped_at(0, {1.0, 0.0})});
  auto obs = to_robot_frame(w, {0});
  CHECK(obs[0].rel_position.isApprox(Vec2(1.0, 0.0)));

  w.robot.heading = std::numbers::pi / 2;
  w.pedestrians[0].position = {0.0, 1.0};
  obs = to_robot_frame(w, {0});
  CHECK((obs[0].rel_position - Vec2(1.0, 0.0)).norm() < 1e-12);

  w.robot.velocity = {0.3, -0.2};
  w.pedestrians[0].velocity = {0.3, -0.2};
  obs = to_robot_frame(w, {0});
  CHECK(obs[0].rel_velocity.norm() < 1e-15);
}

TEST_CASE("to_robot_frame round-trips to world coordinates") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    WorldState w = world_with({ped_at(0, {rng.uniform(-5, 5), rng.uniform(-5, 5)},
                                      {rng.uniform(-1, 1), rng.uniform(-1, 1)})});
    w.robot.position = {rng.uniform(-5, 5), rng.uniform(-5, 5)};
    w.robot.heading = rng.uniform(-std::numbers::pi, std::numbers::pi);
    w.robot.velocity = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const auto obs = to_robot_frame(w, {0});
    const Vec2 back = w.robot.position + rotate<double>(obs[0].rel_position, w.robot.heading);
    const Vec2 back_v = w.robot.velocity + rotate<double>(obs[0].rel_velocity, w.robot.heading);
    CHECK((back - w.pedestrians[0].position).norm() < 1e-12);
    CHECK((back_v - w.pedestrians[0].velocity).norm() < 1e-12);
  }
}

TEST_CASE("coop label threshold") {
  PedestrianObservation o;
  o.set_coop_prob(0.5);
  CHECK(o.coop_label == 1);
  o.set_coop_prob(0.4999);
  CHECK(o.coop_label == 0);
}

TEST_CASE("build_adjacency kernel values") {
  TrajectoryHistory h(8, 0.25);
  WorldState w = world_with({ped_at(0, {1, 1}), ped_at(1, {1, 1})});
  h.update(w, {0, 1});
  Mat a = build_adjacency(h, {0, 1});
  CHECK(a(0, 1) == doctest::Approx(1.0));
  CHECK(a(0, 0) == 0.0);

  w = world_with({ped_at(0, {0, 0}), ped_at(1, {0, 2.0})});
  TrajectoryHistory h2(8, 0.25);
  h2.update(w, {0, 1});
  a = build_adjacency(h2, {0, 1});
  CHECK(a(0, 1) == doctest::Approx(std::exp(-1.0)));
  CHECK(a(1, 0) == a(0, 1));

  a = build_adjacency(h2, {0});
  CHECK(a.rows() == 1);
  CHECK(a(0, 0) == 0.0);
}

TEST_CASE("TrajectoryHistory: eviction, ordering and occlusion masks") {
  TrajectoryHistory h(8, 0.25);
  WorldState w = world_with({ped_at(0, {1, 0}, {0, 1})});
  // Visible 3 steps, occluded 4 steps, visible 5 steps.
  const int pattern[] = {1, 1, 1, 0, 0, 0, 0, 1, 1, 1, 1, 1};
  for (int k = 0; k < 12; ++k) {
    w.time = 0.25 * k;
    w.step_index = k;
    w.pedestrians[0].position += Vec2(0, 0.25);
    h.update(w, pattern[k] ? std::vector<int>{0} : std::vector<int>{});
    if (k == 6) {
      const auto& e = h.entries(0);
      CHECK(e.size() == 7);
      CHECK(std::count_if(e.begin(), e.end(), [](const auto& x) { return !x.valid; }) == 4);
    }
  }
  const auto& e = h.entries(0);
  CHECK(e.size() == 8);
  for (std::size_t i = 1; i < e.size(); ++i) CHECK(e[i].time > e[i - 1].time);
  // Window now covers steps 4..11: 3 occluded, 5 visible.
  CHECK(std::count_if(e.begin(), e.end(), [](const auto& x) { return !x.valid; }) == 3);
  CHECK(h.valid_count(0) == 5);
  CHECK(h.visible_consecutively(0));

  const TrajectoryWindow win = h.window({0});
  CHECK(win.valid.count() == 5);
  // Held entries repeat the last observed position.
  CHECK(win.position(0, 0) == win.position(0, 1));
}

TEST_CASE("TrajectoryHistory drops tracks without valid entries") {
  TrajectoryHistory h(3, 0.25);
  WorldState w = world_with({ped_at(0, {1, 0})});
  h.update(w, {0});
  for (int k = 1; k <= 3; ++k) {
    w.time = 0.25 * k;
    h.update(w, {});
  }
  CHECK_FALSE(h.tracks(0));
}

TEST_CASE("build_graph edge counts") {
  TrajectoryHistory h(8, 0.25);
  RobotState robot;
  SpatioTemporalGraph g = build_graph(h, robot, {});
  CHECK(g.spatial_edges.empty());
  CHECK(g.temporal_edges.empty());

  WorldState w = world_with({ped_at(0, {1, 0}), ped_at(1, {0, 2}), ped_at(2, {-2, 0})});
  h.update(w, {0, 1});
  w.time = 0.25;
  h.update(w, {0, 1, 2});
  auto obs = to_robot_frame(w, {0, 1});
  g = build_graph(h, w.robot, obs);
  CHECK(g.spatial_edges.size() == 3);
  CHECK(g.temporal_edges.size() == 2);
  for (auto [i, j] : g.spatial_edges) CHECK(i != j);

  obs = to_robot_frame(w, {0, 1, 2});
  g = build_graph(h, w.robot, obs);
  CHECK(std::find(g.temporal_edges.begin(), g.temporal_edges.end(), 2) == g.temporal_edges.end());
  CHECK(g.spatial_edges.size() == 6);
}
