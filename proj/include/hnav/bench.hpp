#ifndef HNAV_BENCH_HPP
#define HNAV_BENCH_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hnav/navigator.hpp"

namespace hnav {

struct PedSnapshot {
  int id = 0;
  Vec2 position = Vec2::Zero();
  bool cooperative = false;  // ground truth
};

/// One control step. The snapshot fields describe the world when the
/// decision was taken; reward, intrusion and outcome refer to the state after it.
struct StepRecord {
  int step = 0;
  double time = 0.0;
  std::uint64_t digest = 0;  // world snapshot digest before the step
  Vec3 robot = Vec3::Zero();  // (x, y, heading)
  std::vector<PedSnapshot> peds;
  std::vector<int> visible;
  std::vector<double> coop_probs;  // aligned with visible
  int horizon = 0;
  Control control;
  std::string mpc_status;  // empty for the baselines
  RewardBreakdown reward;
  std::optional<double> min_barrier;  // over visible pedestrians, stack labels
  bool intrusion = false;             // ground-truth labels and margins
};

struct EpisodeLog {
  std::string scenario;
  std::string stack;
  std::uint64_t seed = 0;
  Outcome outcome = Outcome::Timeout;
  double duration = 0.0;     // s
  double path_length = 0.0;  // m
  Vec2 start = Vec2::Zero();
  Vec2 goal = Vec2::Zero();
  Vec3 final_robot = Vec3::Zero();
  double sensing_range = 5.0;
  int degraded_steps = 0;
  std::vector<std::string> notes;
  std::vector<StepRecord> steps;
};

/// FNV-1a over the bytes of the robot and pedestrian states.
std::uint64_t world_digest(const WorldState& world);

/// Whether the robot is inside any pedestrian's ground-truth safety distance.
bool intrusion(const WorldState& world, const SafetyMargins& margins);

struct EpisodeOptions {
  NavigatorConfig nav;
  RewardCoeffs reward;
  std::string scenario = "custom";
  /// Hook for tests: replaces the spawned world.
  std::function<void(WorldState&)> edit_world;
};

EpisodeLog run_episode(const SimConfig& config, const PolicyStack& stack, std::uint64_t seed,
                       const EpisodeOptions& options = {});

struct EpisodeRow {
  std::uint64_t seed = 0;
  Outcome outcome = Outcome::Timeout;
  double duration = 0.0;
  double path_length = 0.0;
  double air = 0.0;  // percent of steps with intrusion
  int steps = 0;
  int degraded_steps = 0;
};

struct MetricsSummary {
  std::string scenario;
  std::string stack;
  int n_episodes = 0;
  int n_success = 0;
  double SR = 0.0, CR = 0.0, OR = 0.0;  // percent
  double ANT = 0.0;  // s, NaN without successes
  double ATL = 0.0;  // m, NaN without successes
  double AIR = 0.0;  // percent, mean over episodes
  std::vector<EpisodeRow> rows;
};

/// Percentage of steps whose intrusion flag is set (0 for an empty log).
double intrusion_ratio(const EpisodeLog& log);

MetricsSummary summarize(const std::vector<EpisodeLog>& logs);

/// Worker count: hardware concurrency, capped by HORIZON_NAV_THREADS.
int worker_threads();

/// Episodes with seeds base_seed + i, run on worker_threads() threads;
/// results are ordered by episode index.
std::vector<EpisodeLog> run_episodes(const SimConfig& config, const PolicyStack& stack, int n_episodes,
                                     std::uint64_t base_seed, const EpisodeOptions& options = {});

MetricsSummary evaluate(const SimConfig& config, const PolicyStack& stack, int n_episodes,
                        std::uint64_t base_seed, const EpisodeOptions& options = {},
                        std::vector<EpisodeLog>* logs = nullptr);

struct SweepRow {
  std::string scenario;
  int h = 0;
  MetricsSummary metrics;
};

/// FixedHorizon(h) for every (scenario, h) pair, scenarios outer.
std::vector<SweepRow> fixed_horizon_sweep(const std::vector<std::pair<std::string, SimConfig>>& scenarios,
                                          const std::vector<int>& horizons, int n_episodes,
                                          std::uint64_t base_seed,
                                          std::shared_ptr<const CoopNetParams> coop,
                                          const EpisodeOptions& options = {});

// Output formats (see docs/formats.md).
void write_episode_log(const std::string& path, const EpisodeLog& log);
EpisodeLog read_episode_log(const std::string& path);
void write_episode_csv(const std::string& path, const MetricsSummary& summary);
std::string summary_json(const MetricsSummary& summary);
void write_summary_json(const std::string& path, const MetricsSummary& summary);
void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows);

std::string render_trajectory(const EpisodeLog& log);
std::string render_sweep(const std::vector<SweepRow>& rows);

}  // namespace hnav

#endif  // HNAV_BENCH_HPP
