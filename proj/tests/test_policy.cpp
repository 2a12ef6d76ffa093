#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "hnav/gradcheck.hpp"
#include "hnav/policy.hpp"

using namespace hnav;

namespace {

WorldState robot_world(Vec2 position) {
  WorldState w;
  w.robot.position = position;
  w.robot.goal = Vec2(0.0, 6.0);
  return w;
}

std::vector<PedestrianObservation> labeled(std::initializer_list<int> labels) {
  std::vector<PedestrianObservation> obs;
  for (int c : labels) {
    PedestrianObservation o;
    o.set_coop_prob(c ? 0.9 : 0.1);
    obs.push_back(o);
  }
  return obs;
}

PolicyObservation random_obs(Rng& rng, int m) {
  PolicyObservation obs;
  for (int r = 0; r < 9; ++r) obs.robot(r) = rng.uniform(-2, 2);
  obs.peds.resize(m, 5);
  for (int i = 0; i < m; ++i)
    for (int c = 0; c < 5; ++c) obs.peds(i, c) = rng.uniform(-2, 2);
  return obs;
}

// Terminates after a single step with a collision.
class OneStepCollisionEnv : public HorizonEnv {
 public:
  PolicyObservation reset(std::uint64_t) override { return {}; }
  Step step(int h) override {
    Step s;
    WorldState a = robot_world({0.0, -6.0}), b = robot_world({0.0, -5.75});
    s.reward = compute_reward(a, b, {1.0, 0.5}, h, {}, Outcome::Collision);
    s.done = true;
    return s;
  }
};

}  // namespace

TEST_CASE("compute_reward: terminal, potential, kinematic and horizon terms") {
  const WorldState a = robot_world({0.0, -6.0});
  const WorldState b = robot_world({0.0, -5.75});
  RewardCoeffs c;
  CHECK(compute_reward(a, b, {1, 0}, 10, {}, Outcome::Success).r_term == 10.0);
  CHECK(compute_reward(a, b, {1, 0}, 10, {}, Outcome::Collision).r_term == -20.0);
  CHECK(compute_reward(a, b, {1, 0}, 10, {}, Outcome::Timeout).r_term == -20.0);
  CHECK(compute_reward(a, b, {1, 0}, 10, {}, Outcome::Running).r_term == 0.0);

  const RewardBreakdown r = compute_reward(a, b, {1, 0}, c.h_max, {}, Outcome::Running);
  CHECK(r.r_horizon == 0.0);
  CHECK(r.r_pot == doctest::Approx(0.5));
  CHECK(compute_reward(a, b, {1, 0}, 4, {}, Outcome::Running).r_horizon == doctest::Approx(-0.06));

  const RewardBreakdown k = compute_reward(a, a, {-0.5, 1.0}, 10, {}, Outcome::Running);
  CHECK(k.r_kin == doctest::Approx(-0.05 - 0.125));
  CHECK(k.r_pot == 0.0);
}

TEST_CASE("compute_reward: visibility social term") {
  const WorldState a = robot_world({0.0, -6.0});
  // 3 of 5 non-cooperative: high branch.
  const auto high = labeled({0, 0, 0, 1, 1});
  CHECK(non_coop_fraction(high) == doctest::Approx(0.6));
  CHECK(compute_reward(a, a, {0, 0}, 5, high, Outcome::Running).r_vis_social == doctest::Approx(-0.30));
  // Exactly half: the strict inequality sends it to the low branch.
  const auto half = labeled({0, 1});
  CHECK(compute_reward(a, a, {0, 0}, 5, half, Outcome::Running).r_vis_social ==
        doctest::Approx(0.05 * 5 * 0.5));
  // Nobody visible counts as fully cooperative.
  CHECK(compute_reward(a, a, {0, 0}, 4, {}, Outcome::Running).r_vis_social == doctest::Approx(0.2));

  RewardCoeffs c;
  c.eta_high = 2.0;
  CHECK(compute_reward(a, a, {0, 0}, 3, high, Outcome::Running, c).r_vis_social ==
        doctest::Approx(-0.1 * 9 * 0.6));
}

TEST_CASE("compute_reward: total is the exact sum") {
  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    WorldState a = robot_world({rng.uniform(-5, 5), rng.uniform(-5, 5)});
    WorldState b = robot_world({rng.uniform(-5, 5), rng.uniform(-5, 5)});
    std::vector<PedestrianObservation> obs = labeled({});
    for (int i = 0; i < static_cast<int>(rng.below(5)); ++i) obs.push_back(labeled({static_cast<int>(rng.below(2))})[0]);
    const auto outcome = static_cast<Outcome>(rng.below(4));
    const RewardBreakdown r = compute_reward(a, b, {rng.uniform(-0.5, 1), rng.uniform(-1, 1)},
                                             1 + static_cast<int>(rng.below(10)), obs, outcome);
    CHECK(r.r_total == r.r_term + r.r_pot + r.r_kin + r.r_horizon + r.r_vis_social);
  }
}

TEST_CASE("encode_observation: empty pool, permutation, duplication") {
  Rng rng(12);
  const PolicyParams p = PolicyParams::init(16, 10, &rng);
  PolicyObservation empty = random_obs(rng, 0);
  CHECK(pooled_context(empty, p).isZero());
  CHECK(encode_observation(empty, p).size() == 16);

  PolicyObservation two = random_obs(rng, 2);
  PolicyObservation swapped = two;
  swapped.peds.row(0) = two.peds.row(1);
  swapped.peds.row(1) = two.peds.row(0);
  CHECK((encode_observation(two, p) - encode_observation(swapped, p)).norm() < 1e-12);

  PolicyObservation dup = two;
  dup.peds.conservativeResize(3, 5);
  dup.peds.row(2) = two.peds.row(0);
  CHECK((pooled_context(dup, p) - pooled_context(two, p)).norm() > 1e-6);
}

TEST_CASE("policy_forward: head behavior and distribution validity") {
  Rng rng(13);
  PolicyParams p = PolicyParams::init(16, 10, &rng);
  const PolicyObservation obs = random_obs(rng, 3);
  p.pi_w.setZero();
  p.pi_b.setZero();
  p.v_w.setZero();
  p.v_b(0, 0) = 0.37;
  PolicyOutput out = policy_forward(obs, p);
  CHECK((out.probs.array() - 0.1).abs().maxCoeff() < 1e-15);
  CHECK(out.value == 0.37);

  for (int k = 0; k < 10; ++k) {
    p.pi_b.setOnes();
    p.pi_b(0, k) += 1.0;
    CHECK(greedy_horizon(policy_forward(obs, p).probs) == k + 1);
  }

  for (int t = 0; t < 50; ++t) {
    for (int j = 0; j < 10; ++j) p.pi_b(0, j) = rng.uniform(-300, 300);
    out = policy_forward(obs, p);
    CHECK(std::abs(out.probs.sum() - 1.0) < 1e-9);
    CHECK(out.probs.minCoeff() >= 0.0);
  }
}

TEST_CASE("sample_horizon frequencies match probabilities") {
  Eigen::RowVectorXd probs(5);
  probs << 0.1, 0.4, 0.05, 0.25, 0.2;
  Rng rng(14);
  std::vector<int> counts(5, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(sample_horizon(probs, rng) - 1)];
  for (int j = 0; j < 5; ++j) CHECK(std::abs(counts[static_cast<std::size_t>(j)] / double(n) - probs(j)) < 0.01);
}

TEST_CASE("GAE and rollout collection") {
  HorizonOnlyEnv env;
  Rng rng(15);
  const PolicyParams p = PolicyParams::init(8, 10, &rng);
  PpoConfig config;
  CHECK(collect_rollouts(env, p, 0, 1, config).steps.empty());

  const RolloutBuffer a = collect_rollouts(env, p, 40, 7, config);
  const RolloutBuffer b = collect_rollouts(env, p, 40, 7, config);
  REQUIRE(a.steps.size() == 40);
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    CHECK(a.steps[i].horizon == b.steps[i].horizon);
    CHECK(a.steps[i].advantage == b.steps[i].advantage);
    CHECK(a.steps[i].obs.peds == b.steps[i].obs.peds);
  }
  CHECK(a.steps[15].done);

  OneStepCollisionEnv crash;
  const RolloutBuffer c = collect_rollouts(crash, p, 1, 3, config);
  const Transition& t = c.steps[0];
  // -20 terminal, +0.5 progress, -0.05 * 0.25 turning, horizon and social terms.
  const double expected = -20.0 + 0.5 - 0.0125 - 0.01 * (10 - t.horizon) + 0.05 * t.horizon;
  CHECK(t.reward.r_total == doctest::Approx(expected));
  CHECK(t.ret == doctest::Approx(expected));
  CHECK(t.advantage == doctest::Approx(expected - t.value));

  // Hand-rolled two-step GAE with bootstrap.
  RolloutBuffer g;
  g.steps.resize(2);
  g.steps[0].reward.r_total = 1.0;
  g.steps[0].value = 0.5;
  g.steps[1].reward.r_total = 2.0;
  g.steps[1].value = 0.25;
  g.bootstrap_value = 1.0;
  g.compute_gae(0.9, 0.8);
  const double d1 = 2.0 + 0.9 * 1.0 - 0.25;
  const double d0 = 1.0 + 0.9 * 0.25 - 0.5;
  CHECK(g.steps[1].advantage == doctest::Approx(d1));
  CHECK(g.steps[0].advantage == doctest::Approx(d0 + 0.9 * 0.8 * d1));
  const auto norm = g.normalized_advantages();
  CHECK(norm[0] + norm[1] == doctest::Approx(0.0));
}

TEST_CASE("ppo_loss identities") {
  Rng rng(16);
  const PolicyParams p = PolicyParams::init(8, 10, &rng);
  HorizonOnlyEnv env;
  RolloutBuffer buf = collect_rollouts(env, p, 8, 2, PpoConfig{});
  std::vector<const Transition*> batch;
  for (const auto& t : buf.steps) batch.push_back(&t);

  // Fresh rollout: every ratio is 1, so the surrogate is the mean advantage.
  const std::vector<double> adv{0.5, -1.0, 2.0, 0.0, 0.1, 0.3, -0.7, 1.1};
  PpoConfig config;
  const PpoLossTerms terms = ppo_loss(batch, adv, p, config, nullptr);
  CHECK(terms.surrogate == doctest::Approx(2.3 / 8.0));
  CHECK(terms.policy == doctest::Approx(-2.3 / 8.0));

  // Zero advantages with entropy and value terms off: no gradient at all.
  config.entropy_coeff = 0.0;
  config.value_coeff = 0.0;
  PolicyParams grad = PolicyParams::init(8, 10, nullptr);
  ppo_loss(batch, std::vector<double>(8, 0.0), p, config, &grad);
  for (const Mat* g : std::as_const(grad).tensors()) CHECK(g->isZero());

  const auto zero_norm = RolloutBuffer{std::vector<Transition>(3), 0.0}.normalized_advantages();
  for (double a : zero_norm) CHECK(a == 0.0);
}

TEST_CASE("PPO analytic gradient matches finite differences") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    for (const auto& t : ppo_gradcheck(seed).tensors) {
      INFO(t.name);
      CHECK(t.rel_error < 1e-4);
    }
  }
}

TEST_CASE("PPO prefers long horizons when only the horizon term is rewarded") {
  HorizonOnlyEnv env;
  PolicyTrainConfig config;
  config.updates = 80;
  config.d_p = 32;
  std::vector<LearningCurveRow> curve;
  const PolicyParams p = train_policy(env, config, &curve);
  CHECK(curve.size() == 80);
  CHECK(curve.back().mean_horizon > curve.front().mean_horizon);
  HorizonOnlyEnv probe;
  PolicyObservation obs = probe.reset(123);
  double mass = 0.0;
  for (int i = 0; i < 100; ++i) {
    mass += policy_forward(obs, p).probs(9);
    obs = probe.step(1).obs;
  }
  CHECK(mass / 100 > 0.9);

  const auto dir = std::filesystem::temp_directory_path();
  const std::string csv = (dir / "hnav_curve.csv").string();
  write_learning_curve(csv, curve);
  std::ifstream in(csv);
  std::string header;
  std::getline(in, header);
  CHECK(header == "update,mean_return,mean_horizon,policy_loss,value_loss,entropy,total_loss");
  std::remove(csv.c_str());

  const std::string bin = (dir / "hnav_policy.bin").string();
  p.save(bin);
  const PolicyParams q = PolicyParams::load(bin);
  CHECK(policy_forward(obs, q).probs == policy_forward(obs, p).probs);
  std::remove(bin.c_str());
}
