#ifndef HNAV_POLICY_HPP
#define HNAV_POLICY_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hnav/common.hpp"
#include "hnav/nn.hpp"
#include "hnav/sensing.hpp"
#include "hnav/world.hpp"

namespace hnav {

// ---------------------------------------------------------------------------
// Reward

enum class Outcome { Running, Success, Collision, Timeout };

const char* outcome_name(Outcome o);

struct RewardCoeffs {
  double lambda_h = 0.01;
  double lambda_pot = 2.0;
  double lambda_r = 0.05;
  double lambda_v = 0.25;
  double lambda_high = -0.1;
  double lambda_low = 0.05;
  double eta_high = 1.0;
  double eta_low = 1.0;
  int h_max = 10;
  double goal_reward = 10.0;
  double failure_reward = -20.0;
};

struct RewardBreakdown {
  double r_term = 0.0;
  double r_pot = 0.0;
  double r_kin = 0.0;
  double r_horizon = 0.0;
  double r_vis_social = 0.0;
  double r_total = 0.0;
};

/// Fraction of visible pedestrians labeled non-cooperative; 0 with none visible.
double non_coop_fraction(const std::vector<PedestrianObservation>& visible);

RewardBreakdown compute_reward(const WorldState& prev_world, const WorldState& world,
                               const Control& u, int h,
                               const std::vector<PedestrianObservation>& visible,
                               Outcome outcome, const RewardCoeffs& coeffs = {});

// ---------------------------------------------------------------------------
// Policy network

/// Policy input: the robot node and one (dp_x, dp_y, dv_x, dv_y, c) row per
/// visible pedestrian, all robot-relative.
struct PolicyObservation {
  Eigen::Matrix<double, 9, 1> robot = Eigen::Matrix<double, 9, 1>::Zero();
  Mat peds = Mat::Zero(0, 5);
};

PolicyObservation policy_observation(const SpatioTemporalGraph& graph);

struct PolicyParams {
  int d_p = 64;
  int h_max = 10;
  Mat ped_w1, ped_b1, ped_w2, ped_b2;  // 5 -> d_p -> d_p
  Mat rob_w1, rob_b1, rob_w2, rob_b2;  // 9 -> d_p -> d_p
  Mat att_wq, att_wk;                  // d_p x d_p
  Mat fuse_w, fuse_b;                  // 2 d_p -> d_p
  Mat pi_w, pi_b;                      // d_p -> h_max
  Mat v_w, v_b;                        // d_p -> 1

  static PolicyParams init(int d_p, int h_max, Rng* rng);

  std::vector<Mat*> tensors();
  std::vector<const Mat*> tensors() const;

  void save(const std::string& path) const;
  static PolicyParams load(const std::string& path);
};

struct PolicyOutput {
  Eigen::RowVectorXd logits;
  Eigen::RowVectorXd probs;  // over horizons 1..h_max
  double value = 0.0;
};

/// Attention-pooled pedestrian context concatenated with the robot encoding
/// and fused to d_p features.
Eigen::RowVectorXd encode_observation(const PolicyObservation& obs, const PolicyParams& params);

/// Softmax-pooled pedestrian context alone (zero without pedestrians).
Eigen::RowVectorXd pooled_context(const PolicyObservation& obs, const PolicyParams& params);

PolicyOutput policy_forward(const PolicyObservation& obs, const PolicyParams& params);

/// Horizon in 1..h_max drawn from the categorical distribution.
int sample_horizon(const Eigen::RowVectorXd& probs, Rng& rng);
int greedy_horizon(const Eigen::RowVectorXd& probs);

/// Accumulates into `grad` the parameter gradient for upstream gradients on
/// the logits (1 x h_max) and the value.
void policy_backward(const PolicyObservation& obs, const PolicyParams& params,
                     const Eigen::RowVectorXd& d_logits, double d_value, PolicyParams& grad);

// ---------------------------------------------------------------------------
// PPO

struct PpoConfig {
  double gamma = 0.99;
  double lambda_gae = 0.95;
  double clip = 0.2;
  double learning_rate = 3e-4;
  int epochs = 4;
  int minibatch = 64;
  double entropy_coeff = 0.01;
  double value_coeff = 0.5;
};

struct Transition {
  PolicyObservation obs;
  int horizon = 1;
  double log_prob = 0.0;
  double value = 0.0;
  RewardBreakdown reward;
  bool done = false;
  double advantage = 0.0;
  double ret = 0.0;
};

struct RolloutBuffer {
  std::vector<Transition> steps;
  /// Value estimate of the state following the last step (used when it is not terminal).
  double bootstrap_value = 0.0;

  void compute_gae(double gamma, double lambda);
  std::vector<double> normalized_advantages() const;
};

struct PpoLossTerms {
  double policy = 0.0;   // clipped surrogate loss (negated objective)
  double value = 0.0;    // mean squared value error
  double entropy = 0.0;  // mean entropy
  double total = 0.0;    // policy + c_v value - c_e entropy
  double surrogate = 0.0;  // mean unclipped ratio * advantage
};

/// Full PPO loss over the given transitions with pre-normalized advantages;
/// accumulates the gradient into `grad` when non-null.
PpoLossTerms ppo_loss(const std::vector<const Transition*>& batch,
                      const std::vector<double>& advantages, const PolicyParams& params,
                      const PpoConfig& config, PolicyParams* grad);

/// Environment with a horizon action, used for rollout collection.
class HorizonEnv {
 public:
  struct Step {
    PolicyObservation obs;
    RewardBreakdown reward;
    bool done = false;
  };
  virtual ~HorizonEnv() = default;
  virtual PolicyObservation reset(std::uint64_t seed) = 0;
  virtual Step step(int horizon) = 0;
};

/// Runs n_steps environment steps, resetting on termination with seeds
/// seed, seed + 1, ... GAE is computed before returning.
RolloutBuffer collect_rollouts(HorizonEnv& env, const PolicyParams& params, int n_steps,
                               std::uint64_t seed, const PpoConfig& config);

class PpoTrainer {
 public:
  PpoTrainer(PolicyParams params, PpoConfig config, std::uint64_t seed);

  /// One PPO update over the buffer; returns the mean loss terms of the last epoch.
  PpoLossTerms update(const RolloutBuffer& buffer);

  const PolicyParams& params() const { return params_; }
  PolicyParams& params() { return params_; }

 private:
  PolicyParams params_;
  PpoConfig config_;
  nn::Adam adam_;
  Rng rng_;
};

struct PolicyTrainConfig {
  PpoConfig ppo;
  int updates = 200;
  int steps_per_update = 128;
  int d_p = 64;
  int h_max = 10;
  std::uint64_t seed = 0;
};

struct LearningCurveRow {
  int update = 0;
  double mean_return = 0.0;  // mean undiscounted return of episodes finished in this batch
  double mean_horizon = 0.0;
  PpoLossTerms loss;
};

/// Alternates rollout collection and PPO updates on one environment.
PolicyParams train_policy(HorizonEnv& env, const PolicyTrainConfig& config,
                          std::vector<LearningCurveRow>* curve = nullptr,
                          const std::function<void(const LearningCurveRow&)>& on_update = {});

void write_learning_curve(const std::string& path, const std::vector<LearningCurveRow>& curve);

/// Reward is r_horizon alone; observations are random crowds of 0-4 pedestrians.
class HorizonOnlyEnv : public HorizonEnv {
 public:
  explicit HorizonOnlyEnv(RewardCoeffs coeffs = {}, int episode_length = 16)
      : coeffs_(coeffs), episode_length_(episode_length), rng_(0) {}
  PolicyObservation reset(std::uint64_t seed) override;
  Step step(int horizon) override;

 private:
  PolicyObservation random_observation();
  RewardCoeffs coeffs_;
  int episode_length_;
  int t_ = 0;
  Rng rng_;
};

}  // namespace hnav

#endif  // HNAV_POLICY_HPP
