#include "hnav/sensing.hpp"

#include <algorithm>
#include <cmath>

namespace hnav {
namespace {

// Distance from point c to the closed segment [a, b].
double segment_point_distance(const Vec2& a, const Vec2& b, const Vec2& c) {
  const Vec2 ab = b - a;
  const double len_sq = ab.squaredNorm();
  if (len_sq == 0.0) return (c - a).norm();
  const double t = std::clamp((c - a).dot(ab) / len_sq, 0.0, 1.0);
  return (a + t * ab - c).norm();
}

}  // namespace

std::vector<int> observe(const WorldState& world, const SimConfig& config) {
  const Vec2& origin = world.robot.position;
  std::vector<int> visible;
  for (const auto& ped : world.pedestrians) {
    const double dist = (ped.position - origin).norm();
    if (dist > config.sensing_range) continue;
    bool occluded = false;
    for (const auto& other : world.pedestrians) {
      if (other.id == ped.id) continue;
      if ((other.position - origin).norm() >= dist) continue;
      if (segment_point_distance(origin, ped.position, other.position) < other.radius) {
        occluded = true;
        break;
      }
    }
    if (!occluded) visible.push_back(ped.id);
  }
  std::sort(visible.begin(), visible.end());
  return visible;
}

std::vector<PedestrianObservation> to_robot_frame(const WorldState& world,
                                                  const std::vector<int>& visible) {
  std::vector<PedestrianObservation> out;
  out.reserve(visible.size());
  const double theta = world.robot.heading;
  for (int id : visible) {
    const auto it = std::find_if(world.pedestrians.begin(), world.pedestrians.end(),
                                 [id](const AgentState& p) { return p.id == id; });
    if (it == world.pedestrians.end()) continue;
    PedestrianObservation obs;
    obs.ped_id = id;
    obs.rel_position = rotate<double>(it->position - world.robot.position, -theta);
    obs.rel_velocity = rotate<double>(it->velocity - world.robot.velocity, -theta);
    out.push_back(obs);
  }
  return out;
}

void TrajectoryHistory::update(const WorldState& world, const std::vector<int>& visible) {
  robot_.push_back(world.robot.position);
  while (static_cast<int>(robot_.size()) > length_) robot_.pop_front();
  for (int id : visible) {
    const auto it = std::find_if(world.pedestrians.begin(), world.pedestrians.end(),
                                 [id](const AgentState& p) { return p.id == id; });
    if (it == world.pedestrians.end()) continue;
    tracks_[id].push_back({world.time, it->position, true});
  }
  for (auto it = tracks_.begin(); it != tracks_.end();) {
    auto& buf = it->second;
    if (!std::binary_search(visible.begin(), visible.end(), it->first)) {
      buf.push_back({world.time, buf.back().position, false});
    }
    while (static_cast<int>(buf.size()) > length_) buf.pop_front();
    const bool any_valid =
        std::any_of(buf.begin(), buf.end(), [](const Entry& e) { return e.valid; });
    it = any_valid ? std::next(it) : tracks_.erase(it);
  }
}

int TrajectoryHistory::valid_count(int id) const {
  const auto it = tracks_.find(id);
  if (it == tracks_.end()) return 0;
  return static_cast<int>(
      std::count_if(it->second.begin(), it->second.end(), [](const Entry& e) { return e.valid; }));
}

bool TrajectoryHistory::visible_consecutively(int id) const {
  const auto it = tracks_.find(id);
  if (it == tracks_.end() || it->second.size() < 2) return false;
  const auto& buf = it->second;
  return buf[buf.size() - 1].valid && buf[buf.size() - 2].valid;
}

TrajectoryWindow TrajectoryHistory::window(const std::vector<int>& ids) const {
  TrajectoryWindow w;
  w.dt = dt_;
  const int m = static_cast<int>(ids.size());
  w.positions = Mat::Zero(m, 2 * length_);
  w.valid.setConstant(m, length_, false);
  if (!robot_.empty()) {
    w.robot = Mat::Zero(1, 2 * length_);
    const int offset = length_ - static_cast<int>(robot_.size());
    for (int slot = 0; slot < length_; ++slot) {
      const Vec2& r = robot_[static_cast<std::size_t>(std::max(slot - offset, 0))];
      w.robot(0, 2 * slot) = r.x();
      w.robot(0, 2 * slot + 1) = r.y();
    }
  }
  for (int i = 0; i < m; ++i) {
    const auto it = tracks_.find(ids[static_cast<std::size_t>(i)]);
    if (it == tracks_.end()) continue;
    const auto& buf = it->second;
    const int offset = length_ - static_cast<int>(buf.size());
    for (int slot = 0; slot < length_; ++slot) {
      const int k = std::max(slot - offset, 0);
      const Entry& e = buf[static_cast<std::size_t>(k)];
      w.positions(i, 2 * slot) = e.position.x();
      w.positions(i, 2 * slot + 1) = e.position.y();
      w.valid(i, slot) = slot >= offset && e.valid;
    }
  }
  return w;
}

Mat adjacency_from_positions(const std::vector<Vec2>& positions, double length_scale) {
  const auto m = static_cast<Eigen::Index>(positions.size());
  Mat a = Mat::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      const double d = (positions[static_cast<std::size_t>(i)] -
                        positions[static_cast<std::size_t>(j)]).norm();
      a(i, j) = a(j, i) = std::exp(-d / length_scale);
    }
  }
  return a;
}

Mat build_adjacency(const TrajectoryHistory& history, const std::vector<int>& visible,
                    double length_scale) {
  std::vector<Vec2> positions;
  positions.reserve(visible.size());
  for (int id : visible) positions.push_back(history.entries(id).back().position);
  return adjacency_from_positions(positions, length_scale);
}

Eigen::Matrix<double, 9, 1> robot_node_features(const RobotState& robot) {
  Eigen::Matrix<double, 9, 1> f;
  f << robot.position.x(), robot.position.y(), robot.velocity.x(), robot.velocity.y(),
      robot.heading, robot.goal.x(), robot.goal.y(), robot.ref_speed, robot.radius;
  return f;
}

SpatioTemporalGraph build_graph(const TrajectoryHistory& history, const RobotState& robot,
                                const std::vector<PedestrianObservation>& obs) {
  SpatioTemporalGraph g;
  g.robot_node = robot_node_features(robot);
  g.ped_nodes = obs;
  const int n = static_cast<int>(obs.size()) + 1;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) g.spatial_edges.emplace_back(i, j);
  for (const auto& o : obs)
    if (history.visible_consecutively(o.ped_id)) g.temporal_edges.push_back(o.ped_id);
  return g;
}

}  // namespace hnav
