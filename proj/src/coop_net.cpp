#include "hnav/coop_net.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <utility>

namespace hnav {

// Robot offsets are fed in units of 2 m so they sit in the same range as speeds.
constexpr double kRobotScale = 0.5;

CoopNetParams CoopNetParams::init(const CoopNetDims& dims, Rng* rng) {
  CoopNetParams p;
  p.dims = dims;
  const int in = 2 * dims.history_length;
  auto make = [&](Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in) {
    Mat m = Mat::Zero(rows, cols);
    if (rng) nn::init_uniform(m, fan_in, *rng);
    return m;
  };
  p.embed_w = make(in, dims.d, in);
  p.embed_b = make(1, dims.d, in);
  for (int l = 0; l < dims.n_layers; ++l) {
    AttentionLayer layer;
    layer.w_q = make(dims.d, dims.d_k, dims.d);
    layer.w_k = make(dims.d, dims.d_k, dims.d);
    layer.w_v = make(dims.d, dims.d, dims.d);
    layer.ffn_w1 = make(dims.d, dims.d_ff, dims.d);
    layer.ffn_b1 = make(1, dims.d_ff, dims.d);
    layer.ffn_w2 = make(dims.d_ff, dims.d, dims.d_ff);
    layer.ffn_b2 = make(1, dims.d, dims.d_ff);
    p.layers.push_back(std::move(layer));
  }
  p.cls_w1 = make(dims.d, dims.d_ff, dims.d);
  p.cls_b1 = make(1, dims.d_ff, dims.d);
  p.cls_w2 = make(dims.d_ff, 2, dims.d_ff);
  p.cls_b2 = make(1, 2, dims.d_ff);
  return p;
}

std::vector<Mat*> CoopNetParams::tensors() {
  std::vector<Mat*> t{&embed_w, &embed_b};
  for (auto& l : layers) {
    for (Mat* m : {&l.w_q, &l.w_k, &l.w_v, &l.ffn_w1, &l.ffn_b1, &l.ffn_w2, &l.ffn_b2})
      t.push_back(m);
  }
  for (Mat* m : {&cls_w1, &cls_b1, &cls_w2, &cls_b2}) t.push_back(m);
  return t;
}

std::vector<const Mat*> CoopNetParams::tensors() const {
  auto t = const_cast<CoopNetParams*>(this)->tensors();
  return {t.begin(), t.end()};
}

void CoopNetParams::save(const std::string& path) const {
  nn::TensorFile file;
  file.kind = nn::kKindCoopNet;
  file.dims = {dims.history_length, dims.d, dims.d_k, dims.d_ff, dims.n_layers};
  for (const Mat* m : tensors()) file.tensors.push_back(*m);
  nn::write_tensor_file(path, file);
}

CoopNetParams CoopNetParams::load(const std::string& path) {
  const nn::TensorFile file = nn::read_tensor_file(path);
  if (file.kind != nn::kKindCoopNet || file.dims.size() != 5)
    throw FormatError("not a cooperation-network parameter file: " + path);
  CoopNetDims dims{file.dims[0], file.dims[1], file.dims[2], file.dims[3], file.dims[4]};
  CoopNetParams p = init(dims, nullptr);
  auto slots = p.tensors();
  if (slots.size() != file.tensors.size()) throw FormatError("tensor count mismatch: " + path);
  for (std::size_t k = 0; k < slots.size(); ++k) {
    if (slots[k]->rows() != file.tensors[k].rows() || slots[k]->cols() != file.tensors[k].cols())
      throw FormatError("tensor shape mismatch: " + path);
    *slots[k] = file.tensors[k];
  }
  return p;
}

Mat frame_inputs(const TrajectoryWindow& window, int slot) {
  const int m = window.num_peds();
  const int len = window.length();
  const bool with_robot = window.robot.size() == 2 * len;
  Mat u = Mat::Zero(m, 2 * len);
  for (int i = 0; i < m; ++i) {
    // Displacements are expressed in the frame of the first non-zero one, so
    // the inputs do not depend on where or which way the walker started.
    double ref = 0.0;
    for (int k = 1; k <= slot; ++k) {
      const Vec2 d = window.position(i, k) - window.position(i, k - 1);
      if (d.norm() > 1e-9) {
        ref = std::atan2(d.y(), d.x());
        break;
      }
    }
    for (int k = 1; k <= slot; ++k) {
      const Vec2 d = rotate<double>((window.position(i, k) - window.position(i, k - 1)) / window.dt, -ref);
      u(i, 2 * k) = d.x();
      u(i, 2 * k + 1) = d.y();
    }
    // Slot 0 has no displacement; it carries where the robot is, seen from
    // the walker in the same frame.
    if (with_robot) {
      const Vec2 robot(window.robot(0, 2 * slot), window.robot(0, 2 * slot + 1));
      const Vec2 rel = rotate<double>(robot - window.position(i, slot), -ref) * kRobotScale;
      u(i, 0) = rel.x();
      u(i, 1) = rel.y();
    }
  }
  return u;
}

Mat embed_trajectories(const Mat& inputs, const CoopNetParams& params) {
  return nn::tanh(nn::add_bias(inputs * params.embed_w, params.embed_b));
}

Mat with_self_connections(const Mat& adjacency) {
  return adjacency + Mat::Identity(adjacency.rows(), adjacency.cols());
}

Mat gumbel_select(const Mat& adjacency, double tau, double eps, Rng* rng, bool straight_through) {
  if (!(tau > 0.0)) throw std::invalid_argument("gumbel_select: temperature must be positive");
  Mat logits = (adjacency.array() + eps).log().matrix();
  if (!rng) return nn::row_softmax(logits / tau);
  for (Eigen::Index i = 0; i < logits.rows(); ++i)
    for (Eigen::Index j = 0; j < logits.cols(); ++j) logits(i, j) += rng->gumbel();
  if (!straight_through) return nn::row_softmax(logits / tau);
  Mat hard = Mat::Zero(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index j = 0;
    logits.row(i).maxCoeff(&j);
    hard(i, j) = 1.0;
  }
  return hard;
}

namespace {

struct LayerCache {
  Mat x, q, k, v, s, p, z, g;
};

struct FrameCache {
  Mat u, x0;
  std::vector<LayerCache> layers;
  Mat out;
};

FrameCache forward_frame(const Mat& u, const Mat& edges, const CoopNetParams& params) {
  FrameCache fc;
  fc.u = u;
  fc.x0 = embed_trajectories(u, params);
  Mat x = fc.x0;
  const double scale = 1.0 / std::sqrt(static_cast<double>(params.dims.d_k));
  for (const auto& layer : params.layers) {
    LayerCache lc;
    lc.x = x;
    lc.q = x * layer.w_q;
    lc.k = x * layer.w_k;
    lc.v = x * layer.w_v;
    lc.s = nn::row_softmax(lc.q * lc.k.transpose() * scale);
    lc.p = lc.s.cwiseProduct(edges);
    lc.z = x + lc.p * lc.v;
    lc.g = nn::tanh(nn::add_bias(lc.z * layer.ffn_w1, layer.ffn_b1));
    x = nn::add_bias(lc.g * layer.ffn_w2, layer.ffn_b2);
    fc.layers.push_back(std::move(lc));
  }
  fc.out = x;
  return fc;
}

// Accumulates parameter gradients for one frame given dL/d(out).
void backward_frame(const FrameCache& fc, const Mat& d_out, const Mat& edges,
                    const CoopNetParams& params, CoopNetParams& grad) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(params.dims.d_k));
  Mat dx = d_out;
  for (int l = static_cast<int>(params.layers.size()) - 1; l >= 0; --l) {
    const auto& layer = params.layers[static_cast<std::size_t>(l)];
    auto& g = grad.layers[static_cast<std::size_t>(l)];
    const LayerCache& lc = fc.layers[static_cast<std::size_t>(l)];

    g.ffn_w2 += lc.g.transpose() * dx;
    g.ffn_b2 += nn::col_sum(dx);
    const Mat d_pre = (dx * layer.ffn_w2.transpose()).cwiseProduct(
        (1.0 - lc.g.array().square()).matrix());
    g.ffn_w1 += lc.z.transpose() * d_pre;
    g.ffn_b1 += nn::col_sum(d_pre);
    const Mat dz = d_pre * layer.ffn_w1.transpose();

    const Mat dp = dz * lc.v.transpose();
    const Mat dv = lc.p.transpose() * dz;
    const Mat ds = dp.cwiseProduct(edges);
    const Mat d_logits = nn::row_softmax_backward(lc.s, ds) * scale;
    const Mat dq = d_logits * lc.k;
    const Mat dk = d_logits.transpose() * lc.q;

    g.w_q += lc.x.transpose() * dq;
    g.w_k += lc.x.transpose() * dk;
    g.w_v += lc.x.transpose() * dv;
    dx = dz + dq * layer.w_q.transpose() + dk * layer.w_k.transpose() +
         dv * layer.w_v.transpose();
  }
  const Mat d_pre = dx.cwiseProduct((1.0 - fc.x0.array().square()).matrix());
  grad.embed_w += fc.u.transpose() * d_pre;
  grad.embed_b += nn::col_sum(d_pre);
}

std::vector<Vec2> frame_positions(const TrajectoryWindow& window, int slot) {
  std::vector<Vec2> pos;
  for (int i = 0; i < window.num_peds(); ++i) pos.push_back(window.position(i, slot));
  return pos;
}

// Frames each pedestrian is pooled over; all frames if none is valid.
std::vector<std::vector<bool>> pooling_masks(const TrajectoryWindow& window) {
  std::vector<std::vector<bool>> masks(static_cast<std::size_t>(window.num_peds()));
  for (int i = 0; i < window.num_peds(); ++i) {
    auto& mask = masks[static_cast<std::size_t>(i)];
    for (int s = 0; s < window.length(); ++s) mask.push_back(window.valid(i, s));
    if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; }))
      std::fill(mask.begin(), mask.end(), true);
  }
  return masks;
}

Mat pool(const std::vector<Mat>& per_step, const std::vector<std::vector<bool>>& masks) {
  const Eigen::Index m = per_step.front().rows();
  Mat pooled = Mat::Zero(m, per_step.front().cols());
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& mask = masks[static_cast<std::size_t>(i)];
    int count = 0;
    for (std::size_t s = 0; s < per_step.size(); ++s) {
      if (!mask[s]) continue;
      pooled.row(i) += per_step[s].row(i);
      ++count;
    }
    pooled.row(i) /= static_cast<double>(count);
  }
  return pooled;
}

}  // namespace

Mat inter_attention(const Mat& x, const Mat& edges, const AttentionLayer& layer) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(layer.w_q.cols()));
  const Mat q = x * layer.w_q, k = x * layer.w_k, v = x * layer.w_v;
  return nn::row_softmax(q * k.transpose() * scale).cwiseProduct(edges) * v;
}

Mat encoder_layer(const Mat& x, const Mat& edges, const AttentionLayer& layer) {
  const Mat z = x + inter_attention(x, edges, layer);
  return nn::add_bias(nn::tanh(nn::add_bias(z * layer.ffn_w1, layer.ffn_b1)) * layer.ffn_w2,
                      layer.ffn_b2);
}

Eigen::Vector2d predict_cooperation(const std::vector<Mat>& per_step, const std::vector<bool>& valid,
                                    int ped, const CoopNetParams& params) {
  Mat pooled = Mat::Zero(1, per_step.front().cols());
  int count = 0;
  for (std::size_t s = 0; s < per_step.size(); ++s) {
    if (!valid[s]) continue;
    pooled += per_step[s].row(ped);
    ++count;
  }
  pooled /= static_cast<double>(std::max(count, 1));
  const Mat hidden = nn::tanh(nn::add_bias(pooled * params.cls_w1, params.cls_b1));
  const Mat probs = nn::row_softmax(nn::add_bias(hidden * params.cls_w2, params.cls_b2));
  return {probs(0, 0), probs(0, 1)};
}

double coop_loss(const std::vector<Mat>& predictions, const std::vector<std::vector<int>>& labels) {
  double total = 0.0;
  for (std::size_t b = 0; b < predictions.size(); ++b) {
    for (Eigen::Index i = 0; i < predictions[b].rows(); ++i) {
      const int y = labels[b][static_cast<std::size_t>(i)];
      total -= std::log(std::max(predictions[b](i, y), 1e-12));
    }
  }
  return total / static_cast<double>(predictions.size());
}

std::vector<Mat> sample_edges(const TrajectoryWindow& window, const CoopForwardOptions& options) {
  std::vector<Mat> edges;
  for (int s = 0; s < window.length(); ++s) {
    const Mat a = adjacency_from_positions(frame_positions(window, s), options.adjacency_length_scale);
    edges.push_back(
        gumbel_select(with_self_connections(a), options.temperature, options.epsilon, options.noise,
                      options.straight_through));
  }
  return edges;
}

Mat coop_forward(const TrajectoryWindow& window, const CoopNetParams& params,
                 const CoopForwardOptions& options) {
  if (window.num_peds() == 0) return Mat::Zero(0, 2);
  const std::vector<Mat> edges =
      options.frozen_edges ? *options.frozen_edges : sample_edges(window, options);
  std::vector<Mat> per_step;
  for (int s = 0; s < window.length(); ++s) {
    Mat x = embed_trajectories(frame_inputs(window, s), params);
    for (const auto& layer : params.layers) x = encoder_layer(x, edges[static_cast<std::size_t>(s)], layer);
    per_step.push_back(std::move(x));
  }
  const Mat pooled = pool(per_step, pooling_masks(window));
  const Mat hidden = nn::tanh(nn::add_bias(pooled * params.cls_w1, params.cls_b1));
  return nn::row_softmax(nn::add_bias(hidden * params.cls_w2, params.cls_b2));
}

double coop_loss_and_grad(const std::vector<const CoopSample*>& batch, const CoopNetParams& params,
                          const std::vector<std::vector<Mat>>& edges, CoopNetParams* grad) {
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const CoopSample& sample = *batch[b];
    const TrajectoryWindow& w = sample.window;
    const int len = w.length();
    std::vector<FrameCache> frames;
    std::vector<Mat> per_step;
    for (int s = 0; s < len; ++s) {
      frames.push_back(forward_frame(frame_inputs(w, s), edges[b][static_cast<std::size_t>(s)], params));
      per_step.push_back(frames.back().out);
    }
    const auto masks = pooling_masks(w);
    const Mat pooled = pool(per_step, masks);
    const Mat hidden = nn::tanh(nn::add_bias(pooled * params.cls_w1, params.cls_b1));
    const Mat probs = nn::row_softmax(nn::add_bias(hidden * params.cls_w2, params.cls_b2));

    Mat d_logits = probs;
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
      const int y = sample.labels[static_cast<std::size_t>(i)];
      loss -= inv_b * std::log(std::max(probs(i, y), 1e-12));
      d_logits(i, y) -= 1.0;
    }
    if (!grad) continue;
    d_logits *= inv_b;

    grad->cls_w2 += hidden.transpose() * d_logits;
    grad->cls_b2 += nn::col_sum(d_logits);
    const Mat d_hidden_pre = (d_logits * params.cls_w2.transpose())
                                 .cwiseProduct((1.0 - hidden.array().square()).matrix());
    grad->cls_w1 += pooled.transpose() * d_hidden_pre;
    grad->cls_b1 += nn::col_sum(d_hidden_pre);
    const Mat d_pooled = d_hidden_pre * params.cls_w1.transpose();

    for (int s = 0; s < len; ++s) {
      Mat d_out = Mat::Zero(d_pooled.rows(), d_pooled.cols());
      bool any = false;
      for (Eigen::Index i = 0; i < d_pooled.rows(); ++i) {
        const auto& mask = masks[static_cast<std::size_t>(i)];
        if (!mask[static_cast<std::size_t>(s)]) continue;
        const auto count = std::count(mask.begin(), mask.end(), true);
        d_out.row(i) = d_pooled.row(i) / static_cast<double>(count);
        any = true;
      }
      if (any)
        backward_frame(frames[static_cast<std::size_t>(s)], d_out,
                       edges[b][static_cast<std::size_t>(s)], params, *grad);
    }
  }
  return loss;
}

CoopTrainResult train_coop(const std::vector<CoopSample>& dataset, const CoopTrainConfig& config,
                           const CoopNetDims& dims, const std::function<void(int, double)>& on_epoch) {
  if (dataset.empty()) throw TrainingError("train_coop: empty dataset");
  if (config.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  Rng rng(config.seed);
  CoopTrainResult result;
  result.params = CoopNetParams::init(dims, &rng);
  CoopNetParams& params = result.params;
  nn::Adam adam(config.learning_rate);

  const std::size_t n = dataset.size();
  const auto batches_per_epoch = (n + static_cast<std::size_t>(config.batch_size) - 1) /
                                 static_cast<std::size_t>(config.batch_size);
  const double total_steps = static_cast<double>(batches_per_epoch) * config.epochs;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  long step = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(config.batch_size));
      const double progress = total_steps > 1 ? static_cast<double>(step) / (total_steps - 1) : 0.0;
      CoopForwardOptions opts;
      opts.temperature = config.temperature_start +
                         (config.temperature_end - config.temperature_start) * progress;
      opts.epsilon = config.epsilon;
      opts.adjacency_length_scale = config.adjacency_length_scale;
      opts.noise = config.gumbel_noise ? &rng : nullptr;

      std::vector<const CoopSample*> batch;
      std::vector<std::vector<Mat>> edges;
      for (std::size_t k = start; k < end; ++k) {
        batch.push_back(&dataset[order[k]]);
        edges.push_back(sample_edges(batch.back()->window, opts));
      }
      CoopNetParams grad = CoopNetParams::init(dims, nullptr);
      const double loss = coop_loss_and_grad(batch, params, edges, &grad);
      if (!std::isfinite(loss) || !nn::all_finite(std::as_const(grad).tensors()))
        throw TrainingError("train_coop: non-finite loss at epoch " + std::to_string(epoch) +
                            ", step " + std::to_string(step));
      adam.step(params.tensors(), std::as_const(grad).tensors());
      epoch_loss += loss;
      ++step;
    }
    result.loss_curve.push_back(epoch_loss / static_cast<double>(batches_per_epoch));
    if (on_epoch) on_epoch(epoch, result.loss_curve.back());
  }
  return result;
}

double coop_accuracy(const std::vector<CoopSample>& dataset, const CoopNetParams& params) {
  long correct = 0, total = 0;
  for (const auto& sample : dataset) {
    const Mat probs = coop_forward(sample.window, params);
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
      const int predicted = probs(i, 1) >= 0.5 ? 1 : 0;
      correct += predicted == sample.labels[static_cast<std::size_t>(i)];
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

std::vector<double> infer_cooperation(const CoopNetParams& params, const TrajectoryHistory& history,
                                      const std::vector<int>& visible) {
  std::vector<double> probs(visible.size(), 0.0);
  if (visible.empty()) return probs;
  const Mat p = coop_forward(history.window(visible), params);
  for (std::size_t i = 0; i < visible.size(); ++i) {
    if (history.valid_count(visible[i]) >= 2) probs[i] = p(static_cast<Eigen::Index>(i), 1);
  }
  return probs;
}

}  // namespace hnav
