#ifndef HNAV_SENSING_HPP
#define HNAV_SENSING_HPP

#include <deque>
#include <map>
#include <utility>
#include <vector>

#include "hnav/common.hpp"
#include "hnav/world.hpp"

namespace hnav {

/// One visible pedestrian in the robot frame, with its classifier cooperation
/// estimate (coop_label = coop_prob >= 0.5).
struct PedestrianObservation {
  int ped_id = 0;
  Vec2 rel_position = Vec2::Zero();
  Vec2 rel_velocity = Vec2::Zero();
  double coop_prob = 0.0;
  int coop_label = 0;

  void set_coop_prob(double p) {
    coop_prob = p;
    coop_label = p >= 0.5 ? 1 : 0;
  }
};

/// Fixed-length trajectory window for M pedestrians: positions are world
/// frame, row i laid out as (x_0, y_0, ..., x_{L-1}, y_{L-1}) oldest first.
/// Slots before a pedestrian's first sighting, and occluded slots, hold the
/// nearest observed position and are flagged invalid.
struct TrajectoryWindow {
  Mat positions;                                                 // M x 2L
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> valid;     // M x L
  Mat robot;  // 1 x 2L robot positions per slot; empty when unknown
  double dt = 0.25;

  int num_peds() const { return static_cast<int>(positions.rows()); }
  int length() const { return static_cast<int>(valid.cols()); }
  Vec2 position(int ped, int slot) const {
    return {positions(ped, 2 * slot), positions(ped, 2 * slot + 1)};
  }
};

/// Per-pedestrian ring buffers of the last L observed positions.
class TrajectoryHistory {
 public:
  struct Entry {
    double time = 0.0;
    Vec2 position = Vec2::Zero();
    bool valid = false;
  };

  explicit TrajectoryHistory(int length = 8, double dt = 0.25) : length_(length), dt_(dt) {}

  /// Records one sensing step (and the robot position). Visible pedestrians append their position;
  /// tracked but occluded ones append a held copy flagged invalid. Tracks
  /// with no valid entry left in the window are dropped.
  void update(const WorldState& world, const std::vector<int>& visible);

  int length() const { return length_; }
  double dt() const { return dt_; }
  bool tracks(int id) const { return tracks_.count(id) != 0; }
  const std::deque<Entry>& entries(int id) const { return tracks_.at(id); }
  int valid_count(int id) const;
  /// True when the pedestrian was visible at both of the last two steps.
  bool visible_consecutively(int id) const;

  TrajectoryWindow window(const std::vector<int>& ids) const;

 private:
  int length_;
  double dt_;
  std::map<int, std::deque<Entry>> tracks_;
  std::deque<Vec2> robot_;
};

struct SpatioTemporalGraph {
  Eigen::Matrix<double, 9, 1> robot_node = Eigen::Matrix<double, 9, 1>::Zero();
  std::vector<PedestrianObservation> ped_nodes;
  /// Unordered pairs over node indices; 0 is the robot, k+1 is ped_nodes[k].
  std::vector<std::pair<int, int>> spatial_edges;
  /// Pedestrian ids linked between t-1 and t.
  std::vector<int> temporal_edges;
};

/// Visible pedestrian ids, ascending.
std::vector<int> observe(const WorldState& world, const SimConfig& config);

std::vector<PedestrianObservation> to_robot_frame(const WorldState& world,
                                                  const std::vector<int>& visible);

/// Distance kernel adjacency over current positions of the given ids.
Mat build_adjacency(const TrajectoryHistory& history, const std::vector<int>& visible,
                    double length_scale = 2.0);

Mat adjacency_from_positions(const std::vector<Vec2>& positions, double length_scale = 2.0);

/// Robot node features: (p, v, heading, goal, v_ref, radius).
Eigen::Matrix<double, 9, 1> robot_node_features(const RobotState& robot);

SpatioTemporalGraph build_graph(const TrajectoryHistory& history, const RobotState& robot,
                                const std::vector<PedestrianObservation>& obs);

}  // namespace hnav

#endif  // HNAV_SENSING_HPP
