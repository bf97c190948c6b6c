#include "sagin/csac_agent.hpp"

#include <algorithm>
#include <cmath>

namespace sagin {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;
constexpr double kTanhLimit = 1.0 - 1e-12;

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

void copy_state(std::span<double> dst, const EncodedState& s) { std::copy(s.begin(), s.end(), dst.begin()); }

Matrix states_of(std::span<const LowTransition> batch, bool next) {
  Matrix m(batch.size(), kStateDim);
  for (std::size_t b = 0; b < batch.size(); ++b) copy_state(m.row(b), next ? batch[b].next_state : batch[b].state);
  return m;
}

Mlp make_net(int in, const std::vector<int>& hidden, int out, Rng& rng) {
  std::vector<int> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  Mlp net(sizes, Activation::ReLU, Activation::Identity);
  net.init_glorot(rng);
  return net;
}

void write_config(BinaryWriter& w, const CsacConfig& c) {
  w.u64(c.hidden.size());
  for (int h : c.hidden) w.u32(static_cast<std::uint32_t>(h));
  w.u32(static_cast<std::uint32_t>(c.buffer_capacity));
  w.u32(static_cast<std::uint32_t>(c.batch_size));
  w.f64(c.gamma);
  w.f64(c.tau);
  w.f64(c.lr);
  w.f64(c.alpha_lr);
  w.f64(c.initial_alpha);
  w.f64(c.target_entropy);
  w.f64(c.lambda_lr);
  w.f64s(c.cost_thresholds);
  w.f64s(c.initial_lambdas);
  w.u8(c.constrained ? 1 : 0);
}

CsacConfig read_config(BinaryReader& r) {
  CsacConfig c;
  const auto nh = r.u64();
  if (nh > 64) throw CheckpointError("implausible hidden layer count");
  c.hidden.clear();
  for (std::uint64_t i = 0; i < nh; ++i) c.hidden.push_back(static_cast<int>(r.u32()));
  c.buffer_capacity = static_cast<int>(r.u32());
  c.batch_size = static_cast<int>(r.u32());
  c.gamma = r.f64();
  c.tau = r.f64();
  c.lr = r.f64();
  c.alpha_lr = r.f64();
  c.initial_alpha = r.f64();
  c.target_entropy = r.f64();
  c.lambda_lr = r.f64();
  c.cost_thresholds = r.f64s();
  c.initial_lambdas = r.f64s();
  c.constrained = r.u8() != 0;
  return c;
}

Vec3 direction_or(const RawAction& a, const Vec3& fallback) {
  const Vec3 v{a[0], a[1], a[2]};
  const double n = v.norm();
  if (!(n > 1e-12)) return fallback;
  return v * (1.0 / n);
}

}  // namespace

double log1m_tanh_sq(double u) { return 2.0 * (std::log(2.0) - u - softplus(-2.0 * u)); }

Matrix standard_normal(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  std::normal_distribution<double> n01(0.0, 1.0);
  for (double& v : m.storage()) v = n01(rng);
  return m;
}

CsacAgent::CsacAgent(const CsacConfig& cfg, int state_dim, Rng& init_rng) : cfg_(cfg), state_dim_(state_dim) {
  if (!(cfg.initial_alpha > 0.0)) throw ConfigError("csac: initial_alpha must be positive");
  if (cfg.cost_thresholds.size() != kCostCount || cfg.initial_lambdas.size() != kCostCount)
    throw ConfigError("csac: expected two cost thresholds and two initial multipliers");
  actor_ = make_net(state_dim, cfg.hidden, 2 * kActionDim, init_rng);
  q1_ = make_net(state_dim + kActionDim, cfg.hidden, 1, init_rng);
  q2_ = make_net(state_dim + kActionDim, cfg.hidden, 1, init_rng);
  q1_target_ = q1_;
  q2_target_ = q2_;
  actor_opt_ = AdamState::for_network(actor_, cfg.lr);
  q1_opt_ = AdamState::for_network(q1_, cfg.lr);
  q2_opt_ = AdamState::for_network(q2_, cfg.lr);
  alpha_opt_.lr = cfg.alpha_lr;
  log_alpha_ = std::log(cfg.initial_alpha);
  if (cfg.constrained) lambdas_ = {cfg.initial_lambdas[0], cfg.initial_lambdas[1]};
}

double CsacAgent::alpha() const { return std::exp(log_alpha_); }

CsacAgent::BatchSample CsacAgent::sample_batch(const Matrix& states, const Matrix& noise) const {
  const Matrix out = actor_.predict(states);
  BatchSample s{Matrix(states.rows(), kActionDim), std::vector<double>(states.rows(), 0.0)};
  for (std::size_t b = 0; b < states.rows(); ++b) {
    double lp = 0.0;
    for (int i = 0; i < kActionDim; ++i) {
      const double mu = out(b, i);
      const double ls = std::clamp(out(b, kActionDim + i), kLogStdMin, kLogStdMax);
      const double xi = noise(b, i);
      const double u = mu + std::exp(ls) * xi;
      s.raw(b, i) = std::clamp(std::tanh(u), -kTanhLimit, kTanhLimit);
      lp += -0.5 * xi * xi - kHalfLog2Pi - ls - log1m_tanh_sq(u);
    }
    s.log_prob[b] = lp;
  }
  return s;
}

ActionSample CsacAgent::sample_action(std::span<const double> state, Rng& rng, const Vec3& fallback) const {
  const Matrix noise = standard_normal(1, kActionDim, rng);
  const BatchSample bs = sample_batch(Matrix::from_row(state), noise);
  ActionSample a;
  for (int i = 0; i < kActionDim; ++i) a.raw[i] = bs.raw(0, i);
  a.log_prob = bs.log_prob[0];
  a.direction = direction_or(a.raw, fallback);
  return a;
}

Vec3 CsacAgent::mean_action(std::span<const double> state, const Vec3& fallback) const {
  const auto out = actor_.predict(state);
  RawAction a{};
  for (int i = 0; i < kActionDim; ++i) a[i] = std::tanh(out[i]);
  return direction_or(a, fallback);
}

Matrix CsacAgent::critic_input(std::span<const LowTransition> batch, bool next, const Matrix* actions) const {
  Matrix x(batch.size(), static_cast<std::size_t>(state_dim_ + kActionDim));
  for (std::size_t b = 0; b < batch.size(); ++b) {
    auto row = x.row(b);
    copy_state(row, next ? batch[b].next_state : batch[b].state);
    for (int i = 0; i < kActionDim; ++i)
      row[state_dim_ + i] = actions ? (*actions)(b, i) : batch[b].action[i];
  }
  return x;
}

std::vector<double> CsacAgent::soft_q_targets(std::span<const LowTransition> batch, const Matrix& next_noise) const {
  const BatchSample next = sample_batch(states_of(batch, true), next_noise);
  const Matrix x = critic_input(batch, true, &next.raw);
  const Matrix q1 = q1_target_.predict(x);
  const Matrix q2 = q2_target_.predict(x);
  const double a = alpha();
  std::vector<double> y(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    double r = batch[b].reward;
    if (cfg_.constrained)
      for (int c = 0; c < kCostCount; ++c) r -= lambdas_[c] * batch[b].cost[c];
    if (batch[b].done) {
      y[b] = r;
      continue;
    }
    const double qmin = std::min(q1(b, 0), q2(b, 0));
    y[b] = r + cfg_.gamma * (qmin - a * next.log_prob[b]);
  }
  return y;
}

std::vector<double> CsacAgent::soft_q_targets(std::span<const LowTransition> batch, Rng& rng) const {
  return soft_q_targets(batch, standard_normal(batch.size(), kActionDim, rng));
}

CsacAgent::LossAndGrads CsacAgent::critic_loss_and_grads(int i, std::span<const LowTransition> batch,
                                                         std::span<const double> targets) const {
  if (batch.empty()) throw DomainError("critic update: empty batch");
  const Mlp& net = critic(i);
  const ForwardCache cache = net.forward(critic_input(batch, false, nullptr));
  const auto n = static_cast<double>(batch.size());
  Matrix d_out(batch.size(), 1);
  double loss = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const double err = cache.output(b, 0) - targets[b];
    loss += err * err;
    d_out(b, 0) = 2.0 * err / n;
  }
  return {loss / n, net.backward(cache, d_out), 0.0};
}

CsacAgent::LossAndGrads CsacAgent::actor_loss_and_grads(std::span<const LowTransition> batch,
                                                        const Matrix& noise) const {
  if (batch.empty()) throw DomainError("actor update: empty batch");
  const std::size_t n_b = batch.size();
  const auto n = static_cast<double>(n_b);
  const double a = alpha();
  const ForwardCache actor_cache = actor_.forward(states_of(batch, false));
  const Matrix& out = actor_cache.output;

  Matrix raw(n_b, kActionDim), sigma_xi(n_b, kActionDim), in_range(n_b, kActionDim);
  std::vector<double> log_prob(n_b, 0.0);
  for (std::size_t b = 0; b < n_b; ++b) {
    for (int i = 0; i < kActionDim; ++i) {
      const double ls_raw = out(b, kActionDim + i);
      const double ls = std::clamp(ls_raw, kLogStdMin, kLogStdMax);
      in_range(b, i) = (ls_raw >= kLogStdMin && ls_raw <= kLogStdMax) ? 1.0 : 0.0;
      const double xi = noise(b, i);
      sigma_xi(b, i) = std::exp(ls) * xi;
      const double u = out(b, i) + sigma_xi(b, i);
      raw(b, i) = std::clamp(std::tanh(u), -kTanhLimit, kTanhLimit);
      log_prob[b] += -0.5 * xi * xi - kHalfLog2Pi - ls - log1m_tanh_sq(u);
    }
  }

  const Matrix x = critic_input(batch, false, &raw);
  const ForwardCache c1 = q1_.forward(x);
  const ForwardCache c2 = q2_.forward(x);
  Matrix d1(n_b, 1), d2(n_b, 1);
  double loss = 0.0, mean_lp = 0.0;
  for (std::size_t b = 0; b < n_b; ++b) {
    const bool first = c1.output(b, 0) <= c2.output(b, 0);
    const double qmin = first ? c1.output(b, 0) : c2.output(b, 0);
    loss += a * log_prob[b] - qmin;
    mean_lp += log_prob[b];
    (first ? d1 : d2)(b, 0) = -1.0 / n;
  }
  const Matrix g1 = q1_.input_gradient(c1, d1);
  const Matrix g2 = q2_.input_gradient(c2, d2);

  Matrix d_out(n_b, 2 * kActionDim);
  for (std::size_t b = 0; b < n_b; ++b) {
    for (int i = 0; i < kActionDim; ++i) {
      const double t = raw(b, i);
      const double dq_du = (g1(b, state_dim_ + i) + g2(b, state_dim_ + i)) * (1.0 - t * t);
      d_out(b, i) = a * 2.0 * t / n + dq_du;
      d_out(b, kActionDim + i) =
          in_range(b, i) * (a * (-1.0 + 2.0 * t * sigma_xi(b, i)) / n + dq_du * sigma_xi(b, i));
    }
  }
  return {loss / n, actor_.backward(actor_cache, d_out), mean_lp / n};
}

double CsacAgent::temperature_gradient(double mean_log_prob) const {
  return -alpha() * (mean_log_prob + cfg_.target_entropy);
}

std::array<double, 2> CsacAgent::update_critics(std::span<const LowTransition> batch,
                                                std::span<const double> targets) {
  auto l1 = critic_loss_and_grads(0, batch, targets);
  auto l2 = critic_loss_and_grads(1, batch, targets);
  if (!std::isfinite(l1.loss) || !std::isfinite(l2.loss)) throw TrainingError("csac: non-finite critic loss");
  q1_opt_.apply(q1_, l1.grads);
  q2_opt_.apply(q2_, l2.grads);
  return {l1.loss, l2.loss};
}

double CsacAgent::update_actor(std::span<const LowTransition> batch, const Matrix& noise, double* mean_log_prob) {
  auto lg = actor_loss_and_grads(batch, noise);
  if (!std::isfinite(lg.loss)) throw TrainingError("csac: non-finite actor loss");
  actor_opt_.apply(actor_, lg.grads);
  if (mean_log_prob) *mean_log_prob = lg.mean_log_prob;
  return lg.loss;
}

void CsacAgent::update_temperature(double mean_log_prob) {
  const double g = temperature_gradient(mean_log_prob);
  if (!std::isfinite(g)) throw TrainingError("csac: non-finite temperature gradient");
  alpha_opt_.apply(log_alpha_, g);
}

void CsacAgent::update_multipliers(std::span<const LowTransition> batch) {
  if (!cfg_.constrained) {
    lambdas_ = {0.0, 0.0};
    return;
  }
  if (batch.empty()) throw DomainError("multiplier update: empty batch");
  for (int c = 0; c < kCostCount; ++c) {
    double mean = 0.0;
    for (const auto& t : batch) mean += t.cost[c];
    mean /= static_cast<double>(batch.size());
    lambdas_[c] = std::max(0.0, lambdas_[c] + cfg_.lambda_lr * (mean - cfg_.cost_thresholds[c]));
  }
}

void CsacAgent::soft_update_targets() {
  q1_target_.blend_from(q1_, cfg_.tau);
  q2_target_.blend_from(q2_, cfg_.tau);
}

CsacAgent::CycleStats CsacAgent::update_cycle(std::span<const LowTransition> batch, Rng& rng) {
  if (batch.empty()) throw DomainError("csac update: empty batch");
  CycleStats st;
  const auto y = soft_q_targets(batch, rng);
  const auto cl = update_critics(batch, y);
  st.critic1_loss = cl[0];
  st.critic2_loss = cl[1];
  const Matrix noise = standard_normal(batch.size(), kActionDim, rng);
  st.actor_loss = update_actor(batch, noise, &st.mean_log_prob);
  update_temperature(st.mean_log_prob);
  update_multipliers(batch);
  soft_update_targets();
  return st;
}

void CsacAgent::save(BinaryWriter& w) const {
  w.tag("csac");
  write_config(w, cfg_);
  w.u32(static_cast<std::uint32_t>(state_dim_));
  actor_.save(w);
  q1_.save(w);
  q2_.save(w);
  q1_target_.save(w);
  q2_target_.save(w);
  actor_opt_.save(w);
  q1_opt_.save(w);
  q2_opt_.save(w);
  alpha_opt_.save(w);
  w.f64(log_alpha_);
  w.f64(lambdas_[0]);
  w.f64(lambdas_[1]);
}

CsacAgent CsacAgent::load(BinaryReader& r) {
  r.expect_tag("csac");
  CsacAgent a;
  a.cfg_ = read_config(r);
  a.state_dim_ = static_cast<int>(r.u32());
  a.actor_ = Mlp::load(r);
  a.q1_ = Mlp::load(r);
  a.q2_ = Mlp::load(r);
  a.q1_target_ = Mlp::load(r);
  a.q2_target_ = Mlp::load(r);
  a.actor_opt_ = AdamState::load(r);
  a.q1_opt_ = AdamState::load(r);
  a.q2_opt_ = AdamState::load(r);
  a.alpha_opt_ = ScalarAdam::load(r);
  a.log_alpha_ = r.f64();
  a.lambdas_[0] = r.f64();
  a.lambdas_[1] = r.f64();
  return a;
}

}  // namespace sagin
