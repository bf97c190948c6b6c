#pragma once

#include <array>
#include <span>
#include <vector>

#include "sagin/config.hpp"
#include "sagin/env.hpp"
#include "sagin/mlp.hpp"

namespace sagin {

inline constexpr int kActionDim = 3;
using RawAction = std::array<double, kActionDim>;

struct LowTransition {
  EncodedState state{};
  RawAction action{};  // squashed sample in (-1,1)^3, the critic input
  double reward = 0.0;
  CostVector cost{0.0, 0.0};  // non-negative violation form
  EncodedState next_state{};
  bool done = false;

  bool operator==(const LowTransition&) const = default;
};

struct ActionSample {
  RawAction raw{};     // tanh(u)
  Vec3 direction;      // raw / |raw|
  double log_prob = 0.0;
};

// Numerically stable log(1 - tanh(u)^2).
double log1m_tanh_sq(double u);

// Gaussian actor with tanh squashing, twin critics with Polyak targets,
// learned temperature and one Lagrange multiplier per cost.
class CsacAgent {
 public:
  static constexpr double kLogStdMin = -20.0;
  static constexpr double kLogStdMax = 2.0;

  CsacAgent() = default;
  CsacAgent(const CsacConfig& cfg, int state_dim, Rng& init_rng);

  const CsacConfig& config() const { return cfg_; }
  CsacConfig& config() { return cfg_; }
  const Mlp& actor() const { return actor_; }
  const Mlp& critic(int i) const { return i == 0 ? q1_ : q2_; }
  const Mlp& target_critic(int i) const { return i == 0 ? q1_target_ : q2_target_; }
  Mlp& mutable_actor() { return actor_; }
  Mlp& mutable_critic(int i) { return i == 0 ? q1_ : q2_; }
  Mlp& mutable_target_critic(int i) { return i == 0 ? q1_target_ : q2_target_; }

  double log_alpha() const { return log_alpha_; }
  double alpha() const;
  void set_log_alpha(double v) { log_alpha_ = v; }
  const CostVector& lambdas() const { return lambdas_; }
  void set_lambdas(const CostVector& l) { lambdas_ = l; }

  // Stochastic action. A zero-norm squashed sample falls back to `fallback`.
  ActionSample sample_action(std::span<const double> state, Rng& rng, const Vec3& fallback) const;
  // Deterministic evaluation action: normalize(tanh(mu)).
  Vec3 mean_action(std::span<const double> state, const Vec3& fallback) const;

  // Squashed samples for a batch of states given standard-normal noise.
  struct BatchSample {
    Matrix raw;                     // B x 3
    std::vector<double> log_prob;   // B
  };
  BatchSample sample_batch(const Matrix& states, const Matrix& noise) const;

  // r - sum_i lambda_i c_i + gamma (1 - done) (min_j Q'_j(s', a') - alpha log pi(a'|s')).
  std::vector<double> soft_q_targets(std::span<const LowTransition> batch, const Matrix& next_noise) const;
  std::vector<double> soft_q_targets(std::span<const LowTransition> batch, Rng& rng) const;

  struct LossAndGrads {
    double loss = 0.0;
    MlpGrads grads;
    double mean_log_prob = 0.0;  // actor only
  };
  LossAndGrads critic_loss_and_grads(int i, std::span<const LowTransition> batch,
                                     std::span<const double> targets) const;
  // mean(alpha log pi - min_j Q_j(s, a)) with reparameterised a.
  LossAndGrads actor_loss_and_grads(std::span<const LowTransition> batch, const Matrix& noise) const;
  // Gradient of mean(-alpha (log pi + H_target)) with respect to log alpha.
  double temperature_gradient(double mean_log_prob) const;

  // Individual update steps; update_cycle runs them in order.
  std::array<double, 2> update_critics(std::span<const LowTransition> batch, std::span<const double> targets);
  double update_actor(std::span<const LowTransition> batch, const Matrix& noise, double* mean_log_prob);
  void update_temperature(double mean_log_prob);
  void update_multipliers(std::span<const LowTransition> batch);
  void soft_update_targets();

  struct CycleStats {
    double critic1_loss = 0.0;
    double critic2_loss = 0.0;
    double actor_loss = 0.0;
    double mean_log_prob = 0.0;
  };
  // Critic targets are computed once per batch and shared by both critics.
  CycleStats update_cycle(std::span<const LowTransition> batch, Rng& rng);

  void save(BinaryWriter& w) const;
  static CsacAgent load(BinaryReader& r);

 private:
  Matrix critic_input(std::span<const LowTransition> batch, bool next, const Matrix* actions) const;

  CsacConfig cfg_;
  int state_dim_ = kStateDim;
  Mlp actor_;  // outputs [mu(3), log_std(3)]
  Mlp q1_, q2_, q1_target_, q2_target_;
  AdamState actor_opt_, q1_opt_, q2_opt_;
  ScalarAdam alpha_opt_;
  double log_alpha_ = 0.0;
  CostVector lambdas_{0.0, 0.0};
};

Matrix standard_normal(std::size_t rows, std::size_t cols, Rng& rng);

}  // namespace sagin
