#ifndef HNAV_COOP_NET_HPP
#define HNAV_COOP_NET_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hnav/common.hpp"
#include "hnav/nn.hpp"
#include "hnav/sensing.hpp"
#include "hnav/world.hpp"

namespace hnav {

struct CoopNetDims {
  int history_length = 8;  // L
  int d = 32;
  int d_k = 32;
  int d_ff = 64;
  int n_layers = 2;
};

/// One encoder layer: single-head attention masked by the selected edges,
/// then a tanh FFN applied to (X + attention). Row-vector convention
/// (tokens are rows).
struct AttentionLayer {
  Mat w_q, w_k;  // d x d_k
  Mat w_v;       // d x d
  Mat ffn_w1;    // d x d_ff
  Mat ffn_b1;    // 1 x d_ff
  Mat ffn_w2;    // d_ff x d
  Mat ffn_b2;    // 1 x d
};

struct CoopNetParams {
  CoopNetDims dims;
  Mat embed_w;  // 2L x d
  Mat embed_b;  // 1 x d
  std::vector<AttentionLayer> layers;
  Mat cls_w1;  // d x d_ff
  Mat cls_b1;  // 1 x d_ff
  Mat cls_w2;  // d_ff x 2
  Mat cls_b2;  // 1 x 2

  /// Uniform(+-1/sqrt(fan_in)) initialization; zero-initialized when rng is null.
  static CoopNetParams init(const CoopNetDims& dims, Rng* rng);

  /// Every tensor in serialization order: embed_w, embed_b, then per layer
  /// w_q, w_k, w_v, ffn_w1, ffn_b1, ffn_w2, ffn_b2, then cls_w1, cls_b1,
  /// cls_w2, cls_b2.
  std::vector<Mat*> tensors();
  std::vector<const Mat*> tensors() const;

  void save(const std::string& path) const;
  static CoopNetParams load(const std::string& path);
};

struct CoopSample {
  TrajectoryWindow window;
  std::vector<int> labels;  // 1 = cooperative
};

struct CoopTrainConfig {
  int batch_size = 32;
  double learning_rate = 1e-3;
  int epochs = 10;
  double temperature_start = 1.0;
  double temperature_end = 0.5;
  double epsilon = 1e-6;
  double adjacency_length_scale = 2.0;
  /// Sample Gumbel noise in the forward pass; off gives deterministic selection.
  bool gumbel_noise = true;
  std::uint64_t seed = 0;
};

struct CoopTrainResult {
  CoopNetParams params;
  std::vector<double> loss_curve;  // mean minibatch loss per epoch
};

/// Displacement-prefix inputs for frame `slot`: row i holds, for k = 1..slot,
/// (p_k - p_{k-1}) / dt in columns (2k, 2k+1), rotated so the first non-zero
/// displacement points along +x. When the window carries robot positions,
/// columns (0, 1) hold the robot's offset from the walker at `slot` in that
/// frame, in units of 2 m. Every other column is zero.
Mat frame_inputs(const TrajectoryWindow& window, int slot);

/// X = tanh(U W_e + b_e).
Mat embed_trajectories(const Mat& inputs, const CoopNetParams& params);

/// Row-wise Gumbel-softmax over log(A + eps) at temperature tau. With a null
/// rng the deterministic temperature softmax is returned. With noise, the
/// straight-through forward sample is the one-hot argmax of the perturbed
/// logits (whose expectation is exactly softmax(log(A + eps))); pass
/// straight_through = false for the relaxed soft sample instead.
Mat gumbel_select(const Mat& adjacency, double tau, double eps, Rng* rng,
                  bool straight_through = true);

/// A + I: self-connections added before selection.
Mat with_self_connections(const Mat& adjacency);

/// (softmax(Q K^T / sqrt(d_k)) .* E) V with Q = X W_q, K = X W_k, V = X W_v.
Mat inter_attention(const Mat& x, const Mat& edges, const AttentionLayer& layer);

/// FFN(X + inter_attention(X, E)).
Mat encoder_layer(const Mat& x, const Mat& edges, const AttentionLayer& layer);

/// Mean over the valid frames of `per_step` (each M x d) for pedestrian `ped`,
/// then f_coop and softmax. Returns (p_noncoop, p_coop).
Eigen::Vector2d predict_cooperation(const std::vector<Mat>& per_step, const std::vector<bool>& valid,
                                    int ped, const CoopNetParams& params);

/// Cross-entropy: -(1/B) sum_b sum_i log p_{b,i,y}, probabilities clamped at 1e-12.
double coop_loss(const std::vector<Mat>& predictions, const std::vector<std::vector<int>>& labels);

struct CoopForwardOptions {
  double temperature = 1.0;
  double epsilon = 1e-6;
  double adjacency_length_scale = 2.0;
  Rng* noise = nullptr;  // null: deterministic selection
  bool straight_through = true;
  /// Pre-sampled edge matrices, one per frame; overrides selection when set.
  const std::vector<Mat>* frozen_edges = nullptr;
};

/// M x 2 probabilities (non-coop, coop) for every pedestrian of the window.
Mat coop_forward(const TrajectoryWindow& window, const CoopNetParams& params,
                 const CoopForwardOptions& options = {});

/// Per-frame edge matrices as the forward pass would select them.
std::vector<Mat> sample_edges(const TrajectoryWindow& window, const CoopForwardOptions& options);

/// Mean cross-entropy over a batch and its analytic gradient (edges held fixed).
double coop_loss_and_grad(const std::vector<const CoopSample*>& batch, const CoopNetParams& params,
                          const std::vector<std::vector<Mat>>& edges, CoopNetParams* grad);

CoopTrainResult train_coop(const std::vector<CoopSample>& dataset, const CoopTrainConfig& config,
                           const CoopNetDims& dims = {},
                           const std::function<void(int, double)>& on_epoch = {});

/// Per-pedestrian classification accuracy with deterministic selection.
double coop_accuracy(const std::vector<CoopSample>& dataset, const CoopNetParams& params);

/// Scripted-robot episodes: the robot drives straight at v_ref; every step with
/// at least one visible pedestrian yields a sample labeled by ground truth.
std::vector<CoopSample> generate_dataset(const SimConfig& config, int n_episodes,
                                         std::uint64_t seed, int history_length = 8);

/// Synthetic set with exaggerated margins: non-cooperative pedestrians walk
/// straight, cooperative ones curve away from a virtual robot at the origin.
std::vector<CoopSample> generate_separable_dataset(int n_samples, std::uint64_t seed,
                                                   int history_length = 8, double dt = 0.25);

/// Classifier inference for the visible set: cooperation probability per id.
/// Pedestrians with fewer than 2 valid history entries get 0.
std::vector<double> infer_cooperation(const CoopNetParams& params,
                                      const TrajectoryHistory& history,
                                      const std::vector<int>& visible);

void write_dataset(const std::string& path, const std::vector<CoopSample>& dataset);
std::vector<CoopSample> read_dataset(const std::string& path);

}  // namespace hnav

#endif  // HNAV_COOP_NET_HPP
