#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <utility>

#include "hnav/policy.hpp"

namespace hnav {

void RolloutBuffer::compute_gae(double gamma, double lambda) {
  double gae = 0.0;
  for (std::size_t t = steps.size(); t-- > 0;) {
    Transition& tr = steps[t];
    const double next_value = t + 1 < steps.size() ? steps[t + 1].value : bootstrap_value;
    const double nonterminal = tr.done ? 0.0 : 1.0;
    const double delta = tr.reward.r_total + gamma * next_value * nonterminal - tr.value;
    gae = delta + gamma * lambda * nonterminal * gae;
    tr.advantage = gae;
    tr.ret = gae + tr.value;
  }
}

std::vector<double> RolloutBuffer::normalized_advantages() const {
  std::vector<double> a;
  for (const auto& t : steps) a.push_back(t.advantage);
  if (a.empty()) return a;
  const double n = static_cast<double>(a.size());
  const double mean = std::accumulate(a.begin(), a.end(), 0.0) / n;
  double var = 0.0;
  for (double x : a) var += (x - mean) * (x - mean);
  const double sd = std::max(std::sqrt(var / n), 1e-8);
  for (double& x : a) x = (x - mean) / sd;
  return a;
}

PpoLossTerms ppo_loss(const std::vector<const Transition*>& batch,
                      const std::vector<double>& advantages, const PolicyParams& params,
                      const PpoConfig& config, PolicyParams* grad) {
  PpoLossTerms terms;
  if (batch.empty()) return terms;
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Transition& tr = *batch[i];
    const double adv = advantages[i];
    const PolicyOutput out = policy_forward(tr.obs, params);
    const double lse = std::log((out.logits.array() - out.logits.maxCoeff()).exp().sum()) +
                       out.logits.maxCoeff();
    const Eigen::RowVectorXd logp = out.logits.array() - lse;
    const int a = tr.horizon - 1;
    const double ratio = std::exp(logp(a) - tr.log_prob);
    const double surr1 = ratio * adv;
    const double surr2 = std::clamp(ratio, 1.0 - config.clip, 1.0 + config.clip) * adv;
    const double entropy = -(out.probs.array() * logp.array()).sum();
    const double verr = out.value - tr.ret;

    terms.policy -= inv_n * std::min(surr1, surr2);
    terms.surrogate += inv_n * surr1;
    terms.value += inv_n * verr * verr;
    terms.entropy += inv_n * entropy;
    if (!grad) continue;

    // d(-min(surr1, surr2))/d log pi(a): the clipped branch is constant.
    const double d_logp_a = surr1 <= surr2 ? -ratio * adv : 0.0;
    Eigen::RowVectorXd d_logits = -d_logp_a * out.probs;
    d_logits(a) += d_logp_a;
    const Eigen::RowVectorXd d_entropy = -(out.probs.array() * (logp.array() + entropy)).matrix();
    d_logits -= config.entropy_coeff * d_entropy;
    policy_backward(tr.obs, params, inv_n * d_logits, inv_n * config.value_coeff * 2.0 * verr, *grad);
  }
  terms.total = terms.policy + config.value_coeff * terms.value - config.entropy_coeff * terms.entropy;
  return terms;
}

RolloutBuffer collect_rollouts(HorizonEnv& env, const PolicyParams& params, int n_steps,
                               std::uint64_t seed, const PpoConfig& config) {
  RolloutBuffer buffer;
  if (n_steps <= 0) return buffer;
  Rng rng(seed ^ 0xAC7105EEDULL);
  std::uint64_t episode = 0;
  PolicyObservation obs = env.reset(seed);
  for (int t = 0; t < n_steps; ++t) {
    const PolicyOutput out = policy_forward(obs, params);
    Transition tr;
    tr.obs = obs;
    tr.horizon = sample_horizon(out.probs, rng);
    tr.log_prob = std::log(std::max(out.probs(tr.horizon - 1), 1e-300));
    tr.value = out.value;
    HorizonEnv::Step step = env.step(tr.horizon);
    tr.reward = step.reward;
    tr.done = step.done;
    buffer.steps.push_back(std::move(tr));
    obs = step.done ? env.reset(seed + ++episode) : std::move(step.obs);
  }
  buffer.bootstrap_value = buffer.steps.back().done ? 0.0 : policy_forward(obs, params).value;
  buffer.compute_gae(config.gamma, config.lambda_gae);
  return buffer;
}

PpoTrainer::PpoTrainer(PolicyParams params, PpoConfig config, std::uint64_t seed)
    : params_(std::move(params)), config_(config), adam_(config.learning_rate), rng_(seed) {}

PpoLossTerms PpoTrainer::update(const RolloutBuffer& buffer) {
  PpoLossTerms last;
  if (buffer.steps.empty()) return last;
  const std::vector<double> adv = buffer.normalized_advantages();
  const std::size_t n = buffer.steps.size();
  const auto mb = static_cast<std::size_t>(std::max(config_.minibatch, 1));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < config_.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng_.below(i)]);
    PpoLossTerms sum;
    int batches = 0;
    for (std::size_t start = 0; start < n; start += mb) {
      std::vector<const Transition*> batch;
      std::vector<double> batch_adv;
      for (std::size_t k = start; k < std::min(n, start + mb); ++k) {
        batch.push_back(&buffer.steps[order[k]]);
        batch_adv.push_back(adv[order[k]]);
      }
      PolicyParams grad = PolicyParams::init(params_.d_p, params_.h_max, nullptr);
      const PpoLossTerms terms = ppo_loss(batch, batch_adv, params_, config_, &grad);
      if (!std::isfinite(terms.total) || !nn::all_finite(std::as_const(grad).tensors()))
        throw TrainingError("ppo update: non-finite loss (policy " + std::to_string(terms.policy) +
                            ", value " + std::to_string(terms.value) + ", entropy " +
                            std::to_string(terms.entropy) + ")");
      adam_.step(params_.tensors(), std::as_const(grad).tensors());
      sum.policy += terms.policy;
      sum.value += terms.value;
      sum.entropy += terms.entropy;
      sum.total += terms.total;
      sum.surrogate += terms.surrogate;
      ++batches;
    }
    const double inv = 1.0 / batches;
    last = {sum.policy * inv, sum.value * inv, sum.entropy * inv, sum.total * inv, sum.surrogate * inv};
  }
  return last;
}

PolicyParams train_policy(HorizonEnv& env, const PolicyTrainConfig& config,
                          std::vector<LearningCurveRow>* curve,
                          const std::function<void(const LearningCurveRow&)>& on_update) {
  Rng init_rng(config.seed);
  PpoTrainer trainer(PolicyParams::init(config.d_p, config.h_max, &init_rng), config.ppo,
                     config.seed ^ 0x99ULL);
  for (int u = 0; u < config.updates; ++u) {
    const std::uint64_t seed = config.seed + 1000003ULL * static_cast<std::uint64_t>(u + 1);
    const RolloutBuffer buffer =
        collect_rollouts(env, trainer.params(), config.steps_per_update, seed, config.ppo);
    LearningCurveRow row;
    row.update = u;
    double episode_sum = 0.0, finished_sum = 0.0, horizon_sum = 0.0;
    int finished = 0;
    for (const auto& t : buffer.steps) {
      episode_sum += t.reward.r_total;
      horizon_sum += t.horizon;
      if (t.done) {
        finished_sum += episode_sum;
        episode_sum = 0.0;
        ++finished;
      }
    }
    row.mean_return = finished > 0 ? finished_sum / finished : episode_sum;
    row.mean_horizon = buffer.steps.empty() ? 0.0 : horizon_sum / static_cast<double>(buffer.steps.size());
    row.loss = trainer.update(buffer);
    if (curve) curve->push_back(row);
    if (on_update) on_update(row);
  }
  return trainer.params();
}

void write_learning_curve(const std::string& path, const std::vector<LearningCurveRow>& curve) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open for writing: " + path);
  out << "update,mean_return,mean_horizon,policy_loss,value_loss,entropy,total_loss\n";
  out.precision(10);
  for (const auto& r : curve) {
    out << r.update << ',' << r.mean_return << ',' << r.mean_horizon << ',' << r.loss.policy << ','
        << r.loss.value << ',' << r.loss.entropy << ',' << r.loss.total << '\n';
  }
}

PolicyObservation HorizonOnlyEnv::random_observation() {
  PolicyObservation obs;
  const double heading = rng_.uniform(-std::numbers::pi, std::numbers::pi);
  obs.robot << rng_.uniform(-6, 6), rng_.uniform(-6, 6), std::cos(heading), std::sin(heading),
      heading, 0.0, 6.0, 1.0, 0.3;
  const int m = static_cast<int>(rng_.below(5));
  obs.peds.resize(m, 5);
  for (int i = 0; i < m; ++i) {
    obs.peds.row(i) << rng_.uniform(-5, 5), rng_.uniform(-5, 5), rng_.uniform(-2, 2),
        rng_.uniform(-2, 2), static_cast<double>(rng_.below(2));
  }
  return obs;
}

PolicyObservation HorizonOnlyEnv::reset(std::uint64_t seed) {
  rng_ = Rng(seed);
  t_ = 0;
  return random_observation();
}

HorizonEnv::Step HorizonOnlyEnv::step(int horizon) {
  Step s;
  s.reward.r_horizon = -coeffs_.lambda_h * static_cast<double>(coeffs_.h_max - horizon);
  s.reward.r_total = s.reward.r_horizon;
  s.done = ++t_ >= episode_length_;
  s.obs = random_observation();
  return s;
}

}  // namespace hnav
