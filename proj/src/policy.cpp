#include <algorithm>
#include <cmath>

#include "hnav/policy.hpp"

namespace hnav {

PolicyObservation policy_observation(const SpatioTemporalGraph& graph) {
  PolicyObservation obs;
  obs.robot = graph.robot_node;
  obs.peds.resize(static_cast<Eigen::Index>(graph.ped_nodes.size()), 5);
  for (std::size_t i = 0; i < graph.ped_nodes.size(); ++i) {
    const auto& p = graph.ped_nodes[i];
    obs.peds.row(static_cast<Eigen::Index>(i)) << p.rel_position.x(), p.rel_position.y(),
        p.rel_velocity.x(), p.rel_velocity.y(), static_cast<double>(p.coop_label);
  }
  return obs;
}

PolicyParams PolicyParams::init(int d_p, int h_max, Rng* rng) {
  if (d_p < 1 || h_max < 1) throw std::invalid_argument("PolicyParams: dims must be positive");
  PolicyParams p;
  p.d_p = d_p;
  p.h_max = h_max;
  auto make = [&](Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in) {
    Mat m = Mat::Zero(rows, cols);
    if (rng) nn::init_uniform(m, fan_in, *rng);
    return m;
  };
  p.ped_w1 = make(5, d_p, 5);
  p.ped_b1 = make(1, d_p, 5);
  p.ped_w2 = make(d_p, d_p, d_p);
  p.ped_b2 = make(1, d_p, d_p);
  p.rob_w1 = make(9, d_p, 9);
  p.rob_b1 = make(1, d_p, 9);
  p.rob_w2 = make(d_p, d_p, d_p);
  p.rob_b2 = make(1, d_p, d_p);
  p.att_wq = make(d_p, d_p, d_p);
  p.att_wk = make(d_p, d_p, d_p);
  p.fuse_w = make(2 * d_p, d_p, 2 * d_p);
  p.fuse_b = make(1, d_p, 2 * d_p);
  // Small output heads start the policy close to uniform.
  p.pi_w = make(d_p, h_max, d_p) * 0.01;
  p.pi_b = Mat::Zero(1, h_max);
  p.v_w = make(d_p, 1, d_p);
  p.v_b = Mat::Zero(1, 1);
  return p;
}

std::vector<Mat*> PolicyParams::tensors() {
  return {&ped_w1, &ped_b1, &ped_w2, &ped_b2, &rob_w1, &rob_b1, &rob_w2, &rob_b2,
          &att_wq, &att_wk, &fuse_w, &fuse_b, &pi_w,   &pi_b,   &v_w,    &v_b};
}

std::vector<const Mat*> PolicyParams::tensors() const {
  auto t = const_cast<PolicyParams*>(this)->tensors();
  return {t.begin(), t.end()};
}

void PolicyParams::save(const std::string& path) const {
  nn::TensorFile file;
  file.kind = nn::kKindPolicy;
  file.dims = {d_p, h_max};
  for (const Mat* m : tensors()) file.tensors.push_back(*m);
  nn::write_tensor_file(path, file);
}

PolicyParams PolicyParams::load(const std::string& path) {
  const nn::TensorFile file = nn::read_tensor_file(path);
  if (file.kind != nn::kKindPolicy || file.dims.size() != 2)
    throw FormatError("not a policy parameter file: " + path);
  PolicyParams p = init(file.dims[0], file.dims[1], nullptr);
  auto slots = p.tensors();
  if (slots.size() != file.tensors.size()) throw FormatError("tensor count mismatch: " + path);
  for (std::size_t k = 0; k < slots.size(); ++k) {
    if (slots[k]->rows() != file.tensors[k].rows() || slots[k]->cols() != file.tensors[k].cols())
      throw FormatError("tensor shape mismatch: " + path);
    *slots[k] = file.tensors[k];
  }
  return p;
}

namespace {

struct Cache {
  Mat s, a1, e;           // pedestrian rows
  Mat r0, r1, r;          // robot row
  Mat q, k, alpha, ctx;   // attention pooling
  Mat rc, f;              // fused features
  Mat logits;
  double value = 0.0;
};

Cache forward(const PolicyObservation& obs, const PolicyParams& p) {
  Cache c;
  const double scale = 1.0 / std::sqrt(static_cast<double>(p.d_p));
  c.r0 = obs.robot.transpose();
  c.r1 = nn::tanh(nn::add_bias(c.r0 * p.rob_w1, p.rob_b1));
  c.r = nn::tanh(nn::add_bias(c.r1 * p.rob_w2, p.rob_b2));
  c.q = c.r * p.att_wq;
  c.ctx = Mat::Zero(1, p.d_p);
  if (obs.peds.rows() > 0) {
    c.s = obs.peds;
    c.a1 = nn::tanh(nn::add_bias(c.s * p.ped_w1, p.ped_b1));
    c.e = nn::tanh(nn::add_bias(c.a1 * p.ped_w2, p.ped_b2));
    c.k = c.e * p.att_wk;
    c.alpha = nn::row_softmax(c.q * c.k.transpose() * scale);
    c.ctx = c.alpha * c.e;
  }
  c.rc.resize(1, 2 * p.d_p);
  c.rc << c.r, c.ctx;
  c.f = nn::tanh(nn::add_bias(c.rc * p.fuse_w, p.fuse_b));
  c.logits = nn::add_bias(c.f * p.pi_w, p.pi_b);
  c.value = (c.f * p.v_w)(0, 0) + p.v_b(0, 0);
  return c;
}

}  // namespace

Eigen::RowVectorXd encode_observation(const PolicyObservation& obs, const PolicyParams& params) {
  return forward(obs, params).f.row(0);
}

Eigen::RowVectorXd pooled_context(const PolicyObservation& obs, const PolicyParams& params) {
  return forward(obs, params).ctx.row(0);
}

PolicyOutput policy_forward(const PolicyObservation& obs, const PolicyParams& params) {
  const Cache c = forward(obs, params);
  return {c.logits.row(0), nn::row_softmax(c.logits).row(0), c.value};
}

int sample_horizon(const Eigen::RowVectorXd& probs, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (Eigen::Index j = 0; j < probs.size(); ++j) {
    acc += probs(j);
    if (u < acc) return static_cast<int>(j) + 1;
  }
  return static_cast<int>(probs.size());
}

int greedy_horizon(const Eigen::RowVectorXd& probs) {
  Eigen::Index j = 0;
  probs.maxCoeff(&j);
  return static_cast<int>(j) + 1;
}

void policy_backward(const PolicyObservation& obs, const PolicyParams& p,
                     const Eigen::RowVectorXd& d_logits, double d_value, PolicyParams& g) {
  const Cache c = forward(obs, p);
  const double scale = 1.0 / std::sqrt(static_cast<double>(p.d_p));
  const Mat dl = d_logits;
  g.pi_w += c.f.transpose() * dl;
  g.pi_b += dl;
  g.v_w += c.f.transpose() * d_value;
  g.v_b(0, 0) += d_value;

  const Mat df = dl * p.pi_w.transpose() + d_value * p.v_w.transpose();
  const Mat df_pre = df.cwiseProduct((1.0 - c.f.array().square()).matrix());
  g.fuse_w += c.rc.transpose() * df_pre;
  g.fuse_b += df_pre;
  const Mat drc = df_pre * p.fuse_w.transpose();
  Mat dr = drc.leftCols(p.d_p);
  const Mat dctx = drc.rightCols(p.d_p);

  if (obs.peds.rows() > 0) {
    const Mat dalpha = dctx * c.e.transpose();
    Mat de = c.alpha.transpose() * dctx;
    const Mat dscores = nn::row_softmax_backward(c.alpha, dalpha) * scale;
    const Mat dq = dscores * c.k;
    const Mat dk = dscores.transpose() * c.q;
    g.att_wq += c.r.transpose() * dq;
    g.att_wk += c.e.transpose() * dk;
    dr += dq * p.att_wq.transpose();
    de += dk * p.att_wk.transpose();

    const Mat de_pre = de.cwiseProduct((1.0 - c.e.array().square()).matrix());
    g.ped_w2 += c.a1.transpose() * de_pre;
    g.ped_b2 += nn::col_sum(de_pre);
    const Mat da1_pre =
        (de_pre * p.ped_w2.transpose()).cwiseProduct((1.0 - c.a1.array().square()).matrix());
    g.ped_w1 += c.s.transpose() * da1_pre;
    g.ped_b1 += nn::col_sum(da1_pre);
  }

  const Mat dr_pre = dr.cwiseProduct((1.0 - c.r.array().square()).matrix());
  g.rob_w2 += c.r1.transpose() * dr_pre;
  g.rob_b2 += dr_pre;
  const Mat dr1_pre =
      (dr_pre * p.rob_w2.transpose()).cwiseProduct((1.0 - c.r1.array().square()).matrix());
  g.rob_w1 += c.r0.transpose() * dr1_pre;
  g.rob_b1 += dr1_pre;
}

}  // namespace hnav
