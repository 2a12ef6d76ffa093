#include "hnav/gradcheck.hpp"

#include <algorithm>
#include <utility>
#include <cmath>

#include "hnav/coop_net.hpp"
#include "hnav/policy.hpp"

namespace hnav {

double GradCheckReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& t : tensors) worst = std::max(worst, t.rel_error);
  return worst;
}

std::vector<TensorCheck> finite_difference_check(const std::vector<Mat*>& params,
                                                 const std::vector<const Mat*>& analytic,
                                                 const std::vector<std::string>& names,
                                                 const std::function<double()>& loss,
                                                 double step) {
  std::vector<TensorCheck> out;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Mat& p = *params[k];
    Mat numeric(p.rows(), p.cols());
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      for (Eigen::Index j = 0; j < p.cols(); ++j) {
        const double saved = p(i, j);
        p(i, j) = saved + step;
        const double up = loss();
        p(i, j) = saved - step;
        const double down = loss();
        p(i, j) = saved;
        numeric(i, j) = (up - down) / (2.0 * step);
      }
    }
    const double scale = std::max({analytic[k]->norm(), numeric.norm(), 1e-12});
    out.push_back({k < names.size() ? names[k] : "tensor" + std::to_string(k),
                   (*analytic[k] - numeric).norm() / scale});
  }
  return out;
}

namespace {

std::vector<std::string> coop_tensor_names(const CoopNetParams& p) {
  std::vector<std::string> names{"embed_w", "embed_b"};
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    for (const char* n : {"w_q", "w_k", "w_v", "ffn_w1", "ffn_b1", "ffn_w2", "ffn_b2"})
      names.push_back("layer" + std::to_string(l) + "." + n);
  }
  for (const char* n : {"cls_w1", "cls_b1", "cls_w2", "cls_b2"}) names.emplace_back(n);
  return names;
}

}  // namespace

GradCheckReport coop_gradcheck(std::uint64_t seed) {
  Rng rng(seed);
  CoopNetDims dims{4, 8, 8, 8, 2};
  CoopNetParams params = CoopNetParams::init(dims, &rng);
  // Larger weights than the default init so every nonlinearity is exercised.
  for (Mat* t : params.tensors()) *t *= 2.0;

  std::vector<CoopSample> samples(2);
  for (auto& s : samples) {
    const int m = 3;
    s.window.dt = 0.25;
    s.window.positions = Mat::Zero(m, 2 * dims.history_length);
    s.window.valid.setConstant(m, dims.history_length, true);
    for (int i = 0; i < m; ++i) {
      for (int c = 0; c < 2 * dims.history_length; ++c) s.window.positions(i, c) = rng.uniform(-2.0, 2.0);
      s.labels.push_back(static_cast<int>(rng.below(2)));
    }
    s.window.valid(0, 0) = false;  // exercise the masked pooling path
  }

  CoopForwardOptions opts;
  opts.noise = &rng;
  std::vector<const CoopSample*> batch;
  std::vector<std::vector<Mat>> edges;
  for (const auto& s : samples) {
    batch.push_back(&s);
    edges.push_back(sample_edges(s.window, opts));
  }

  CoopNetParams grad = CoopNetParams::init(dims, nullptr);
  coop_loss_and_grad(batch, params, edges, &grad);
  GradCheckReport report;
  report.suite = "coop-net";
  report.tensors = finite_difference_check(
      params.tensors(), std::as_const(grad).tensors(), coop_tensor_names(params),
      [&] { return coop_loss_and_grad(batch, params, edges, nullptr); });
  return report;
}

GradCheckReport ppo_gradcheck(std::uint64_t seed) {
  Rng rng(seed);
  PolicyParams params = PolicyParams::init(8, 5, &rng);
  for (Mat* t : params.tensors()) *t *= 2.0;
  for (Mat* t : {&params.pi_w, &params.pi_b, &params.v_b}) nn::init_uniform(*t, 4, rng);

  std::vector<Transition> steps(4);
  for (std::size_t i = 0; i < steps.size(); ++i) {
    Transition& tr = steps[i];
    for (int r = 0; r < 9; ++r) tr.obs.robot(r) = rng.uniform(-2.0, 2.0);
    const int m = static_cast<int>(i) % 4;  // 0..3 pedestrians
    tr.obs.peds.resize(m, 5);
    for (int p = 0; p < m; ++p)
      for (int c = 0; c < 5; ++c) tr.obs.peds(p, c) = rng.uniform(-2.0, 2.0);
    tr.horizon = 1 + static_cast<int>(rng.below(5));
    const PolicyOutput out = policy_forward(tr.obs, params);
    // Ratios near 1 (unclipped) except the last transition, which sits well
    // inside the clipped region.
    const double shift = i + 1 == steps.size() ? -0.6 : rng.uniform(-0.05, 0.05);
    tr.log_prob = std::log(out.probs(tr.horizon - 1)) + shift;
    tr.ret = rng.uniform(-1.0, 1.0);
  }
  const std::vector<double> adv{0.7, -1.2, 0.4, 1.5};
  std::vector<const Transition*> batch;
  for (const auto& t : steps) batch.push_back(&t);
  PpoConfig config;

  PolicyParams grad = PolicyParams::init(params.d_p, params.h_max, nullptr);
  ppo_loss(batch, adv, params, config, &grad);
  GradCheckReport report;
  report.suite = "ppo";
  const std::vector<std::string> names{"ped_w1", "ped_b1", "ped_w2", "ped_b2", "rob_w1", "rob_b1",
                                       "rob_w2", "rob_b2", "att_wq", "att_wk", "fuse_w", "fuse_b",
                                       "pi_w",   "pi_b",   "v_w",    "v_b"};
  report.tensors = finite_difference_check(
      params.tensors(), std::as_const(grad).tensors(), names,
      [&] { return ppo_loss(batch, adv, params, config, nullptr).total; });
  return report;
}

}  // namespace hnav
