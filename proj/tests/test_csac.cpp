#include <doctest.h>

#include <cmath>

#include "sagin/csac_agent.hpp"
#include "support.hpp"

using namespace sagin;

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

CsacConfig tiny_config() {
  CsacConfig c;
  c.hidden = {12, 8};
  return c;
}

CsacAgent make_agent(std::uint64_t seed, CsacConfig cfg = tiny_config()) {
  Rng rng(seed);
  return CsacAgent(cfg, kStateDim, rng);
}

EncodedState random_state(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  EncodedState s{};
  s[std::uniform_int_distribution<int>(0, 2)(rng)] = 1.0;
  for (int i = 3; i < kStateDim; ++i) s[static_cast<std::size_t>(i)] = u(rng);
  return s;
}

std::vector<LowTransition> random_batch(int n, Rng& rng) {
  std::uniform_real_distribution<double> r(-1.0, 1.0), c(0.0, 1.0);
  std::vector<LowTransition> b;
  for (int i = 0; i < n; ++i) {
    LowTransition t;
    t.state = random_state(rng);
    for (auto& a : t.action) a = 0.9 * r(rng);
    t.reward = r(rng);
    t.cost = {c(rng), i % 3 == 0 ? 1.0 : 0.0};
    t.next_state = random_state(rng);
    t.done = i % 7 == 0;
    b.push_back(t);
  }
  return b;
}

// Every output equals the last-layer bias.
void make_constant(Mlp& net, const std::vector<double>& bias) {
  auto& layers = net.mutable_layers();
  for (auto& l : layers) {
    std::fill(l.w.begin(), l.w.end(), 0.0);
    std::fill(l.b.begin(), l.b.end(), 0.0);
  }
  layers.back().b = bias;
}

// Single linear layer critic: Q(s, a) = c0 + slope * a_x.
Mlp linear_critic(double c0, double slope) {
  Mlp net({kStateDim + kActionDim, 1}, Activation::ReLU, Activation::Identity);
  auto& l = net.mutable_layers()[0];
  l.w[kStateDim] = slope;
  l.b[0] = c0;
  return net;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

TEST_CASE("tanh helper is stable") {
  for (double u : {-30.0, -5.0, -0.3, 0.0, 0.7, 4.0, 30.0}) {
    const double direct = std::log(1.0 - std::tanh(u) * std::tanh(u));
    if (std::abs(u) < 5.0) CHECK(log1m_tanh_sq(u) == doctest::Approx(direct).epsilon(1e-10));
    CHECK(std::isfinite(log1m_tanh_sq(u)));
  }
  CHECK(log1m_tanh_sq(30.0) == doctest::Approx(2.0 * std::log(2.0) - 60.0).epsilon(1e-12));
}

TEST_CASE("sampling: vanishing noise, unit directions and squash range") {
  Rng rng(1);
  CsacAgent agent = make_agent(2);
  const Vec3 fallback{0.0, 0.0, 1.0};
  for (int i = 0; i < 1000; ++i) {
    const auto s = random_state(rng);
    const ActionSample a = agent.sample_action(s, rng, fallback);
    CHECK(std::abs(a.direction.norm() - 1.0) < 1e-9);
    for (double r : a.raw) {
      CHECK(r > -1.0);
      CHECK(r < 1.0);
    }
    CHECK(std::isfinite(a.log_prob));
  }
  // log-std far below the clip: samples collapse onto tanh(mu).
  make_constant(agent.mutable_actor(), {0.4, -0.2, 0.9, -40.0, -40.0, -40.0});
  for (int i = 0; i < 100; ++i) {
    const ActionSample a = agent.sample_action(random_state(rng), rng, fallback);
    CHECK(a.raw[0] == doctest::Approx(std::tanh(0.4)).epsilon(1e-7));
    CHECK(a.raw[1] == doctest::Approx(std::tanh(-0.2)).epsilon(1e-7));
    CHECK(a.raw[2] == doctest::Approx(std::tanh(0.9)).epsilon(1e-7));
  }
  const Vec3 mean = agent.mean_action(random_state(rng), fallback);
  CHECK((mean - Vec3{std::tanh(0.4), std::tanh(-0.2), std::tanh(0.9)}.normalized()).norm() < 1e-12);
  // A zero squashed mean falls back.
  make_constant(agent.mutable_actor(), {0.0, 0.0, 0.0, 0.0, 0.0, 0.0});
  CHECK(agent.mean_action(random_state(rng), fallback) == fallback);
}

TEST_CASE("log-probability matches the squashed Gaussian density") {
  CsacAgent agent = make_agent(3);
  const double mu[3] = {0.3, -0.5, 1.1};
  const double sigma[3] = {0.5, 0.8, 0.3};
  make_constant(agent.mutable_actor(),
                {mu[0], mu[1], mu[2], std::log(sigma[0]), std::log(sigma[1]), std::log(sigma[2])});
  auto log_density = [](double t, double m, double s) {
    const double u = std::atanh(t);
    const double z = (u - m) / s;
    return -0.5 * z * z - kHalfLog2Pi - std::log(s) - std::log(1.0 - t * t);
  };

  Rng rng(4);
  const std::size_t chunk = 100000;
  const int bins = 40;
  std::vector<double> counts(bins, 0.0);
  std::size_t total = 0;
  double max_lp_err = 0.0;
  for (int rep = 0; rep < 10; ++rep) {
    Matrix states(chunk, kStateDim);
    const Matrix noise = standard_normal(chunk, kActionDim, rng);
    const auto bs = agent.sample_batch(states, noise);
    for (std::size_t b = 0; b < chunk; ++b) {
      const double t = bs.raw(b, 0);
      ++counts[static_cast<std::size_t>(std::min(bins - 1, static_cast<int>((t + 1.0) / 2.0 * bins)))];
      if (b < 1000) {
        double lp = 0.0;
        for (int i = 0; i < 3; ++i) lp += log_density(bs.raw(b, i), mu[i], sigma[i]);
        max_lp_err = std::max(max_lp_err, std::abs(lp - bs.log_prob[b]) / std::max(1.0, std::abs(lp)));
      }
    }
    total += chunk;
  }
  // The joint log-probability is the sum of the per-component squashed densities.
  CHECK(max_lp_err < 1e-9);
  // The component histogram follows that density within Monte-Carlo error.
  for (int k = 0; k < bins; ++k) {
    const double lo = -1.0 + 2.0 * k / bins, hi = lo + 2.0 / bins;
    const double p = normal_cdf((std::atanh(hi) - mu[0]) / sigma[0]) - normal_cdf((std::atanh(lo) - mu[0]) / sigma[0]);
    const double mid = 0.5 * (lo + hi);
    const double simpson = (hi - lo) / 6.0 *
                           (std::exp(log_density(lo + 1e-12, mu[0], sigma[0])) +
                            4.0 * std::exp(log_density(mid, mu[0], sigma[0])) +
                            std::exp(log_density(hi - 1e-12, mu[0], sigma[0])));
    if (p > 1e-3) CHECK(simpson == doctest::Approx(p).epsilon(0.02));
    const double expected = p * static_cast<double>(total);
    CHECK(std::abs(counts[static_cast<std::size_t>(k)] - expected) <= 5.0 * std::sqrt(expected) + 5.0);
  }
}

TEST_CASE("soft Q targets: hand oracle and limits") {
  CsacConfig cfg = tiny_config();
  cfg.gamma = 0.9;
  cfg.initial_alpha = 0.2;
  CsacAgent agent = make_agent(5, cfg);
  make_constant(agent.mutable_actor(), {0.0, 0.0, 0.0, 0.0, 0.0, 0.0});
  make_constant(agent.mutable_target_critic(0), {2.0});
  make_constant(agent.mutable_target_critic(1), {1.5});
  agent.set_lambdas({0.5, 2.0});

  LowTransition t;
  t.reward = 0.7;
  t.cost = {0.3, 1.0};
  Matrix noise(1, kActionDim);
  noise(0, 0) = 0.5;
  noise(0, 1) = -1.0;
  noise(0, 2) = 0.25;
  double lp = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double xi = noise(0, static_cast<std::size_t>(i));
    lp += -0.5 * xi * xi - kHalfLog2Pi - std::log(1.0 - std::tanh(xi) * std::tanh(xi));
  }
  const double r_eff = 0.7 - 0.5 * 0.3 - 2.0 * 1.0;
  const std::vector<LowTransition> one{t};
  CHECK(std::abs(agent.soft_q_targets(one, noise)[0] - (r_eff + 0.9 * (1.5 - 0.2 * lp))) < 1e-10);

  // Swapping the target critics leaves the min unchanged.
  std::swap(agent.mutable_target_critic(0), agent.mutable_target_critic(1));
  CHECK(std::abs(agent.soft_q_targets(one, noise)[0] - (r_eff + 0.9 * (1.5 - 0.2 * lp))) < 1e-10);

  LowTransition term = t;
  term.done = true;
  CHECK(agent.soft_q_targets(std::vector<LowTransition>{term}, noise)[0] == r_eff);

  agent.config().gamma = 0.0;
  CHECK(agent.soft_q_targets(one, noise)[0] == r_eff);

  agent.config().gamma = 0.9;
  agent.set_lambdas({0.0, 0.0});
  LowTransition no_cost = t;
  no_cost.cost = {0.0, 0.0};
  CHECK(agent.soft_q_targets(one, noise)[0] == agent.soft_q_targets(std::vector<LowTransition>{no_cost}, noise)[0]);

  CsacConfig off = cfg;
  off.constrained = false;
  off.initial_lambdas = {3.0, 3.0};
  CsacAgent u = make_agent(5, off);
  CHECK(u.lambdas() == CostVector{0.0, 0.0});
  Rng rng(6);
  const auto batch = random_batch(10, rng);
  auto zeroed = batch;
  for (auto& z : zeroed) z.cost = {0.0, 0.0};
  const Matrix nn = standard_normal(10, kActionDim, rng);
  CHECK(u.soft_q_targets(batch, nn) == u.soft_q_targets(zeroed, nn));
}

TEST_CASE("critic losses") {
  Rng rng(7);
  CsacAgent agent = make_agent(8);
  const auto batch = random_batch(6, rng);
  SUBCASE("fixed point") {
    std::vector<double> y1, y2;
    for (int i = 0; i < 2; ++i) {
      Matrix x(batch.size(), kStateDim + kActionDim);
      for (std::size_t b = 0; b < batch.size(); ++b) {
        for (int k = 0; k < kStateDim; ++k) x(b, static_cast<std::size_t>(k)) = batch[b].state[static_cast<std::size_t>(k)];
        for (int k = 0; k < kActionDim; ++k) x(b, static_cast<std::size_t>(kStateDim + k)) = batch[b].action[static_cast<std::size_t>(k)];
      }
      (i == 0 ? y1 : y2) = agent.critic(i).predict(x).storage();
    }
    CHECK(agent.critic_loss_and_grads(0, batch, y1).loss == 0.0);
    CHECK(agent.critic_loss_and_grads(1, batch, y2).loss == 0.0);
    make_constant(agent.mutable_critic(0), {1.25});
    make_constant(agent.mutable_critic(1), {1.25});
    const std::vector<double> y(batch.size(), 1.25);
    const auto losses = agent.update_critics(batch, y);
    CHECK(losses[0] == 0.0);
    CHECK(losses[1] == 0.0);
  }
  SUBCASE("finite differences") {
    std::vector<double> y;
    for (const auto& t : batch) y.push_back(t.reward * 2.0);
    const auto lg = agent.critic_loss_and_grads(0, batch, y);
    Mlp& net = agent.mutable_critic(0);
    const auto numeric = test::numeric_grads(net, [&] { return agent.critic_loss_and_grads(0, batch, y).loss; });
    CHECK(test::max_grad_error(lg.grads, numeric) < 1e-4);
  }
  SUBCASE("swapping critics swaps losses") {
    std::vector<double> y(batch.size(), 0.3);
    const double l1 = agent.critic_loss_and_grads(0, batch, y).loss;
    const double l2 = agent.critic_loss_and_grads(1, batch, y).loss;
    REQUIRE(l1 != l2);
    std::swap(agent.mutable_critic(0), agent.mutable_critic(1));
    CHECK(agent.critic_loss_and_grads(0, batch, y).loss == l2);
    CHECK(agent.critic_loss_and_grads(1, batch, y).loss == l1);
  }
  SUBCASE("critic step leaves targets and actor alone") {
    const Mlp t0 = agent.target_critic(0), a0 = agent.actor();
    agent.update_critics(batch, agent.soft_q_targets(batch, rng));
    CHECK(agent.target_critic(0).same_params(t0));
    CHECK(agent.actor().same_params(a0));
    CHECK_THROWS_AS(agent.update_critics({}, {}), DomainError);
  }
}

TEST_CASE("actor loss: gradients, temperature linearity and min of critics") {
  Rng rng(9);
  CsacAgent agent = make_agent(10);
  const auto batch = random_batch(5, rng);
  const Matrix noise = standard_normal(batch.size(), kActionDim, rng);

  SUBCASE("finite differences through squash and log-prob") {
    const auto lg = agent.actor_loss_and_grads(batch, noise);
    Mlp& actor = agent.mutable_actor();
    const auto numeric = test::numeric_grads(actor, [&] { return agent.actor_loss_and_grads(batch, noise).loss; });
    CHECK(test::max_grad_error(lg.grads, numeric, 1e-6) < 1e-3);
  }
  SUBCASE("loss is linear in alpha") {
    agent.set_log_alpha(std::log(0.1));
    const auto a = agent.actor_loss_and_grads(batch, noise);
    agent.set_log_alpha(std::log(0.2));
    const auto b = agent.actor_loss_and_grads(batch, noise);
    agent.set_log_alpha(std::log(0.4));
    const auto c = agent.actor_loss_and_grads(batch, noise);
    CHECK(b.loss - a.loss == doctest::Approx(0.1 * a.mean_log_prob).epsilon(1e-9));
    CHECK(c.loss - b.loss == doctest::Approx(0.2 * a.mean_log_prob).epsilon(1e-9));
  }
  SUBCASE("only the smaller critic contributes") {
    agent.mutable_critic(0) = linear_critic(1.0, 1.0);
    agent.mutable_critic(1) = linear_critic(3.0, 2.0);
    const auto a = agent.actor_loss_and_grads(batch, noise);
    agent.mutable_critic(1) = linear_critic(100.0, -5.0);
    const auto b = agent.actor_loss_and_grads(batch, noise);
    CHECK(a.loss == b.loss);
    CHECK(test::max_grad_error(a.grads, b.grads, 0.0) == 0.0);
    // Swapping which critic is smaller changes the result.
    agent.mutable_critic(1) = linear_critic(-100.0, -5.0);
    const auto c = agent.actor_loss_and_grads(batch, noise);
    CHECK(c.loss != doctest::Approx(a.loss));
  }
}

TEST_CASE("actor descends a fixed critic landscape") {
  CsacConfig cfg = tiny_config();
  cfg.lr = 0.01;
  CsacAgent agent = make_agent(11, cfg);
  agent.set_log_alpha(-60.0);
  agent.mutable_critic(0) = linear_critic(0.0, 1.0);
  agent.mutable_critic(1) = linear_critic(0.5, 1.0);
  Rng rng(12);
  const auto batch = random_batch(32, rng);
  const Matrix noise = standard_normal(batch.size(), kActionDim, rng);
  const double first = agent.actor_loss_and_grads(batch, noise).loss;
  double mean_x_before = 0.0;
  for (const auto& t : batch) mean_x_before += agent.mean_action(t.state, {0, 0, 1}).x;
  for (int step = 0; step < 100; ++step) agent.update_actor(batch, noise, nullptr);
  const double last = agent.actor_loss_and_grads(batch, noise).loss;
  double mean_x_after = 0.0;
  for (const auto& t : batch) mean_x_after += agent.mean_action(t.state, {0, 0, 1}).x;
  CHECK(last < first);
  CHECK(mean_x_after > mean_x_before);
  CHECK(agent.critic(0).same_params(linear_critic(0.0, 1.0)));
}

TEST_CASE("temperature update direction") {
  CsacConfig cfg = tiny_config();
  cfg.target_entropy = -3.0;
  CsacAgent agent = make_agent(13, cfg);
  const double a0 = agent.alpha();
  // Entropy well above target: mean log-prob far below -H_target.
  agent.update_temperature(-20.0);
  CHECK(agent.alpha() < a0);
  CsacAgent b = make_agent(13, cfg);
  b.update_temperature(15.0);
  CHECK(b.alpha() > a0);
  CsacAgent c = make_agent(13, cfg);
  CHECK(c.temperature_gradient(3.0) == 0.0);
  c.update_temperature(3.0);
  CHECK(c.alpha() == a0);
  CHECK(c.temperature_gradient(1.0) == doctest::Approx(-a0 * (1.0 - 3.0)));
  CHECK_THROWS_AS(c.update_temperature(std::nan("")), TrainingError);
}

TEST_CASE("multiplier dual ascent") {
  CsacConfig cfg = tiny_config();
  cfg.lambda_lr = 0.01;
  cfg.cost_thresholds = {0.05, 0.0};
  CsacAgent agent = make_agent(14, cfg);
  std::vector<LowTransition> batch(4);
  for (auto& t : batch) t.cost = {0.3, 0.0};
  agent.set_lambdas({0.5, 0.0});
  agent.update_multipliers(batch);
  CHECK(agent.lambdas()[0] == doctest::Approx(0.5025).epsilon(1e-12));
  CHECK(agent.lambdas()[1] == 0.0);

  for (auto& t : batch) t.cost = {0.05, 0.0};
  agent.set_lambdas({0.7, 0.2});
  agent.update_multipliers(batch);
  CHECK(agent.lambdas()[0] == doctest::Approx(0.7).epsilon(1e-14));
  CHECK(agent.lambdas()[1] == 0.2);

  // Persistent negative drift never pushes a multiplier below zero.
  CsacConfig neg = cfg;
  neg.cost_thresholds = {0.9, 0.5};
  neg.lambda_lr = 0.3;
  CsacAgent d = make_agent(15, neg);
  d.set_lambdas({0.4, 0.0});
  Rng rng(16);
  for (int it = 0; it < 50; ++it) {
    for (auto& t : batch) t.cost = {std::uniform_real_distribution<double>(0.0, 0.2)(rng), 0.0};
    d.update_multipliers(batch);
    CHECK(d.lambdas()[0] >= 0.0);
    CHECK(d.lambdas()[1] >= 0.0);
  }
  CHECK(d.lambdas()[0] == 0.0);

  CsacConfig off = cfg;
  off.constrained = false;
  CsacAgent u = make_agent(17, off);
  for (auto& t : batch) t.cost = {1.0, 1.0};
  u.update_multipliers(batch);
  CHECK(u.lambdas() == CostVector{0.0, 0.0});
}

TEST_CASE("Polyak target updates") {
  CsacConfig cfg = tiny_config();
  Rng rng(18);
  CsacAgent agent = make_agent(19, cfg);
  agent.update_critics(random_batch(8, rng), std::vector<double>(8, 1.0));
  REQUIRE_FALSE(agent.target_critic(0).same_params(agent.critic(0)));
  const Mlp before = agent.target_critic(0);
  agent.config().tau = 0.0;
  agent.soft_update_targets();
  CHECK(agent.target_critic(0).same_params(before));

  agent.config().tau = 0.1;
  const double src = agent.critic(0).layers()[1].w[3];
  double gap = before.layers()[1].w[3] - src;
  for (int k = 0; k < 20; ++k) {
    agent.soft_update_targets();
    const double new_gap = agent.target_critic(0).layers()[1].w[3] - src;
    CHECK(new_gap == doctest::Approx(0.9 * gap).epsilon(1e-9));
    gap = new_gap;
  }
  agent.config().tau = 1.0;
  agent.soft_update_targets();
  CHECK(agent.target_critic(0).same_params(agent.critic(0)));
  CHECK(agent.target_critic(1).same_params(agent.critic(1)));

  CsacAgent fresh = make_agent(20, cfg);
  CHECK(fresh.target_critic(0).same_params(fresh.critic(0)));
  CHECK(fresh.target_critic(1).same_params(fresh.critic(1)));
}

TEST_CASE("unconstrained cycle matches a zero-multiplier run") {
  CsacConfig off = tiny_config();
  off.constrained = false;
  CsacConfig on = tiny_config();
  on.lambda_lr = 0.0;
  CsacAgent a = make_agent(21, off), b = make_agent(21, on);
  Rng data(22);
  Rng ra(23), rb(23);
  for (int it = 0; it < 5; ++it) {
    const auto batch = random_batch(8, data);
    auto zeroed = batch;
    for (auto& t : zeroed) t.cost = {0.0, 0.0};
    const auto sa = a.update_cycle(batch, ra);
    const auto sb = b.update_cycle(zeroed, rb);
    CHECK(sa.critic1_loss == sb.critic1_loss);
    CHECK(sa.actor_loss == sb.actor_loss);
  }
  CHECK(a.actor().same_params(b.actor()));
  CHECK(a.critic(1).same_params(b.critic(1)));
  CHECK(a.target_critic(0).same_params(b.target_critic(0)));
  CHECK(a.alpha() == b.alpha());
}

TEST_CASE("csac construction and serialization") {
  CsacConfig bad = tiny_config();
  bad.initial_alpha = 0.0;
  Rng rng(24);
  CHECK_THROWS_AS(CsacAgent(bad, kStateDim, rng), ConfigError);
  bad = tiny_config();
  bad.cost_thresholds = {0.1};
  CHECK_THROWS_AS(CsacAgent(bad, kStateDim, rng), ConfigError);

  CsacAgent agent = make_agent(25);
  agent.update_cycle(random_batch(8, rng), rng);
  BinaryWriter w;
  agent.save(w);
  BinaryReader r(w.bytes());
  const CsacAgent back = CsacAgent::load(r);
  BinaryWriter w2;
  back.save(w2);
  CHECK(w2.bytes() == w.bytes());
  CHECK(back.alpha() == agent.alpha());
  CHECK(back.lambdas() == agent.lambdas());

  BinaryReader bad_tag(std::string_view(w.bytes()).substr(3));
  CHECK_THROWS_AS(CsacAgent::load(bad_tag), CheckpointError);
}
