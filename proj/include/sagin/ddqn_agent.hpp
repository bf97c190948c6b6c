#pragma once

#include <span>
#include <vector>

#include "sagin/config.hpp"
#include "sagin/env.hpp"
#include "sagin/mlp.hpp"

namespace sagin {

struct TopTransition {
  EncodedState state{};
  int action = 0;
  double reward = 0.0;
  EncodedState next_state{};
  bool done = false;

  bool operator==(const TopTransition&) const = default;
};

// Double deep Q-network: the online network picks the bootstrap action, the
// target network scores it.
class DdqnAgent {
 public:
  DdqnAgent() = default;
  DdqnAgent(const DdqnConfig& cfg, int state_dim, int n_actions, Rng& init_rng);
  // Wraps explicit networks (tests, toy problems). Target starts as a copy of `eval`.
  DdqnAgent(const DdqnConfig& cfg, Mlp eval);

  int n_actions() const { return eval_.output_size(); }
  const DdqnConfig& config() const { return cfg_; }
  DdqnConfig& config() { return cfg_; }
  const Mlp& eval_net() const { return eval_; }
  const Mlp& target_net() const { return target_; }
  Mlp& mutable_eval_net() { return eval_; }
  Mlp& mutable_target_net() { return target_; }
  const AdamState& optimizer() const { return adam_; }

  double epsilon() const { return epsilon_; }
  void set_epsilon(double eps) { epsilon_ = eps; }
  // Exponential per-episode decay reaching eps_final at eps_decay_fraction * total.
  static double epsilon_for_episode(const DdqnConfig& cfg, int episode, int total_episodes);

  std::vector<double> q_values(std::span<const double> state) const;
  // Greedy ties resolve to the lowest action index (Remain).
  int greedy_action(std::span<const double> state) const;
  int select_action(std::span<const double> state, bool explore, Rng& rng) const;

  double td_target(const TopTransition& t) const;
  std::vector<double> td_targets(std::span<const TopTransition> batch) const;

  struct LossAndGrads {
    double loss = 0.0;
    MlpGrads grads;
  };
  LossAndGrads loss_and_grads(std::span<const TopTransition> batch, std::span<const double> targets) const;

  // One Adam step on the online network; returns the pre-update MSE.
  double train_batch(std::span<const TopTransition> batch);

  bool maybe_sync_target(std::uint64_t global_step);

  void save(BinaryWriter& w) const;
  static DdqnAgent load(BinaryReader& r);

 private:
  DdqnConfig cfg_;
  Mlp eval_;
  Mlp target_;
  AdamState adam_;
  double epsilon_ = 0.0;
};

}  // namespace sagin
