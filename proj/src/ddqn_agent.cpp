#include "sagin/ddqn_agent.hpp"

#include <algorithm>
#include <cmath>

namespace sagin {

namespace {

Matrix stack_states(std::span<const TopTransition> batch, bool next) {
  Matrix m(batch.size(), kStateDim);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& s = next ? batch[b].next_state : batch[b].state;
    std::copy(s.begin(), s.end(), m.row(b).begin());
  }
  return m;
}

std::size_t argmax_row(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < row.size(); ++i)
    if (row[i] > row[best]) best = i;
  return best;
}

}  // namespace

DdqnAgent::DdqnAgent(const DdqnConfig& cfg, int state_dim, int n_actions, Rng& init_rng) : cfg_(cfg) {
  std::vector<int> sizes{state_dim};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(n_actions);
  eval_ = Mlp(sizes, Activation::ReLU, Activation::Identity);
  eval_.init_glorot(init_rng);
  target_ = eval_;
  adam_ = AdamState::for_network(eval_, cfg.lr);
  epsilon_ = cfg.eps_init;
}

DdqnAgent::DdqnAgent(const DdqnConfig& cfg, Mlp eval) : cfg_(cfg), eval_(std::move(eval)) {
  target_ = eval_;
  adam_ = AdamState::for_network(eval_, cfg.lr);
  epsilon_ = cfg.eps_init;
}

double DdqnAgent::epsilon_for_episode(const DdqnConfig& cfg, int episode, int total_episodes) {
  const double horizon = cfg.eps_decay_fraction * total_episodes;
  if (!(horizon > 0.0) || cfg.eps_init <= cfg.eps_final) return cfg.eps_final;
  const double rate = std::log(cfg.eps_final / cfg.eps_init) / horizon;
  return std::max(cfg.eps_final, cfg.eps_init * std::exp(rate * episode));
}

std::vector<double> DdqnAgent::q_values(std::span<const double> state) const { return eval_.predict(state); }

int DdqnAgent::greedy_action(std::span<const double> state) const {
  return static_cast<int>(argmax_row(q_values(state)));
}

int DdqnAgent::select_action(std::span<const double> state, bool explore, Rng& rng) const {
  if (explore) {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    if (u < epsilon_) return std::uniform_int_distribution<int>(0, n_actions() - 1)(rng);
  }
  return greedy_action(state);
}

double DdqnAgent::td_target(const TopTransition& t) const {
  return td_targets(std::span<const TopTransition>(&t, 1)).front();
}

std::vector<double> DdqnAgent::td_targets(std::span<const TopTransition> batch) const {
  const Matrix next = stack_states(batch, true);
  const Matrix q_online = eval_.predict(next);
  const Matrix q_target = target_.predict(next);
  std::vector<double> y(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (batch[b].done) {
      y[b] = batch[b].reward;
      continue;
    }
    const std::size_t a_hat = argmax_row(q_online.row(b));
    y[b] = batch[b].reward + cfg_.gamma * q_target(b, a_hat);
  }
  return y;
}

DdqnAgent::LossAndGrads DdqnAgent::loss_and_grads(std::span<const TopTransition> batch,
                                                  std::span<const double> targets) const {
  if (batch.empty()) throw DomainError("train_batch: empty batch");
  const Matrix states = stack_states(batch, false);
  const ForwardCache cache = eval_.forward(states);
  const auto n = static_cast<double>(batch.size());
  Matrix d_out(batch.size(), static_cast<std::size_t>(n_actions()));
  double loss = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto a = static_cast<std::size_t>(batch[b].action);
    const double err = cache.output(b, a) - targets[b];
    loss += err * err;
    d_out(b, a) = 2.0 * err / n;
  }
  return {loss / n, eval_.backward(cache, d_out)};
}

double DdqnAgent::train_batch(std::span<const TopTransition> batch) {
  if (batch.empty()) throw DomainError("train_batch: empty batch");
  const auto y = td_targets(batch);
  auto lg = loss_and_grads(batch, y);
  if (!std::isfinite(lg.loss)) throw TrainingError("ddqn: non-finite loss");
  adam_.apply(eval_, lg.grads);
  return lg.loss;
}

bool DdqnAgent::maybe_sync_target(std::uint64_t global_step) {
  if (global_step % static_cast<std::uint64_t>(cfg_.sync_period) != 0) return false;
  target_.copy_from(eval_);
  return true;
}

void DdqnAgent::save(BinaryWriter& w) const {
  w.tag("ddqn");
  w.u64(cfg_.hidden.size());
  for (int h : cfg_.hidden) w.u32(static_cast<std::uint32_t>(h));
  w.f64(cfg_.eps_init);
  w.f64(cfg_.eps_final);
  w.f64(cfg_.eps_decay_fraction);
  w.u32(static_cast<std::uint32_t>(cfg_.buffer_capacity));
  w.u32(static_cast<std::uint32_t>(cfg_.batch_size));
  w.f64(cfg_.gamma);
  w.u32(static_cast<std::uint32_t>(cfg_.sync_period));
  w.f64(cfg_.lr);
  eval_.save(w);
  target_.save(w);
  adam_.save(w);
  w.f64(epsilon_);
}

DdqnAgent DdqnAgent::load(BinaryReader& r) {
  r.expect_tag("ddqn");
  DdqnAgent a;
  const auto nh = r.u64();
  if (nh > 64) throw CheckpointError("implausible hidden layer count");
  a.cfg_.hidden.clear();
  for (std::uint64_t i = 0; i < nh; ++i) a.cfg_.hidden.push_back(static_cast<int>(r.u32()));
  a.cfg_.eps_init = r.f64();
  a.cfg_.eps_final = r.f64();
  a.cfg_.eps_decay_fraction = r.f64();
  a.cfg_.buffer_capacity = static_cast<int>(r.u32());
  a.cfg_.batch_size = static_cast<int>(r.u32());
  a.cfg_.gamma = r.f64();
  a.cfg_.sync_period = static_cast<int>(r.u32());
  a.cfg_.lr = r.f64();
  a.eval_ = Mlp::load(r);
  a.target_ = Mlp::load(r);
  a.adam_ = AdamState::load(r);
  a.epsilon_ = r.f64();
  return a;
}

}  // namespace sagin
