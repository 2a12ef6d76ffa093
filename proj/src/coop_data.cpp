#include <cmath>
#include <numbers>

#include "hnav/coop_net.hpp"

namespace hnav {

std::vector<CoopSample> generate_dataset(const SimConfig& config, int n_episodes,
                                         std::uint64_t seed, int history_length) {
  std::vector<CoopSample> dataset;
  const int max_steps = static_cast<int>(std::ceil(config.timeout / config.dt));
  for (int episode = 0; episode < n_episodes; ++episode) {
    WorldState world = spawn_scenario(config, seed + static_cast<std::uint64_t>(episode));
    TrajectoryHistory history(history_length, config.dt);
    const Control drive{config.v_ref, 0.0};
    for (int step = 0; step <= max_steps; ++step) {
      const std::vector<int> visible = observe(world, config);
      history.update(world, visible);
      if (!visible.empty()) {
        CoopSample sample;
        sample.window = history.window(visible);
        for (int id : visible) {
          const auto& ped = world.pedestrians[static_cast<std::size_t>(id)];
          sample.labels.push_back(ped.behavior == Behavior::Cooperative ? 1 : 0);
        }
        dataset.push_back(std::move(sample));
      }
      if ((world.robot.position - world.robot.goal).norm() < config.goal_tolerance) break;
      world = step_world(world, drive, config);
    }
  }
  return dataset;
}

std::vector<CoopSample> generate_separable_dataset(int n_samples, std::uint64_t seed,
                                                   int history_length, double dt) {
  Rng rng(seed);
  std::vector<CoopSample> dataset;
  dataset.reserve(static_cast<std::size_t>(n_samples));
  for (int n = 0; n < n_samples; ++n) {
    const int m = 1 + static_cast<int>(rng.below(5));
    CoopSample sample;
    sample.window.dt = dt;
    sample.window.positions = Mat::Zero(m, 2 * history_length);
    sample.window.valid.setConstant(m, history_length, true);
    sample.window.robot = Mat::Zero(1, 2 * history_length);
    for (int i = 0; i < m; ++i) {
      const bool coop = rng.uniform() < 0.5;
      const double range = rng.uniform(1.0, 5.0);
      const double bearing = rng.uniform(-std::numbers::pi, std::numbers::pi);
      Vec2 p(range * std::cos(bearing), range * std::sin(bearing));
      double heading = rng.uniform(-std::numbers::pi, std::numbers::pi);
      const double speed = rng.uniform(0.8, 1.2);
      // Cooperative walkers turn away from the virtual robot at the origin.
      double turn = 0.0;
      if (coop) {
        const Vec2 dir(std::cos(heading), std::sin(heading));
        const double side = cross2<double>(dir, Vec2(-p));
        turn = -std::copysign(rng.uniform(0.25, 0.4), side == 0.0 ? 1.0 : side);
      }
      const int first_seen = static_cast<int>(rng.below(static_cast<std::uint64_t>(history_length - 2)));
      for (int s = 0; s < history_length; ++s) {
        if (s > 0) {
          heading += turn;
          p += speed * dt * Vec2(std::cos(heading), std::sin(heading));
        }
        const Vec2 noisy = p + 0.01 * Vec2(rng.normal(), rng.normal());
        sample.window.positions(i, 2 * s) = noisy.x();
        sample.window.positions(i, 2 * s + 1) = noisy.y();
      }
      for (int s = 0; s < first_seen; ++s) {
        sample.window.positions(i, 2 * s) = sample.window.positions(i, 2 * first_seen);
        sample.window.positions(i, 2 * s + 1) = sample.window.positions(i, 2 * first_seen + 1);
        sample.window.valid(i, s) = false;
      }
      sample.labels.push_back(coop ? 1 : 0);
    }
    dataset.push_back(std::move(sample));
  }
  return dataset;
}

void write_dataset(const std::string& path, const std::vector<CoopSample>& dataset) {
  nn::TensorFile file;
  file.kind = 3;
  const int len = dataset.empty() ? 0 : dataset.front().window.length();
  const double dt = dataset.empty() ? 0.0 : dataset.front().window.dt;
  file.dims = {len, static_cast<std::int32_t>(dataset.size())};
  file.tensors.push_back(Mat::Constant(1, 1, dt));
  for (const auto& s : dataset) {
    file.tensors.push_back(s.window.positions);
    file.tensors.push_back(s.window.valid.cast<double>());
    file.tensors.push_back(s.window.robot);
    Mat labels(1, static_cast<Eigen::Index>(s.labels.size()));
    for (std::size_t i = 0; i < s.labels.size(); ++i) labels(0, static_cast<Eigen::Index>(i)) = s.labels[i];
    file.tensors.push_back(labels);
  }
  nn::write_tensor_file(path, file);
}

std::vector<CoopSample> read_dataset(const std::string& path) {
  const nn::TensorFile file = nn::read_tensor_file(path);
  if (file.kind != 3 || file.dims.size() != 2) throw FormatError("not a dataset file: " + path);
  const auto n = static_cast<std::size_t>(file.dims[1]);
  if (file.tensors.size() != 1 + 4 * n) throw FormatError("dataset tensor count mismatch: " + path);
  const double dt = file.tensors[0](0, 0);
  std::vector<CoopSample> dataset(n);
  for (std::size_t k = 0; k < n; ++k) {
    CoopSample& s = dataset[k];
    s.window.dt = dt;
    s.window.positions = file.tensors[1 + 4 * k];
    s.window.valid = file.tensors[2 + 4 * k].array() != 0.0;
    s.window.robot = file.tensors[3 + 4 * k];
    const Mat& labels = file.tensors[4 + 4 * k];
    for (Eigen::Index i = 0; i < labels.cols(); ++i) s.labels.push_back(static_cast<int>(labels(0, i)));
  }
  return dataset;
}

}  // namespace hnav
