#pragma once

#include <array>
#include <span>
#include <vector>

#include "sagin/channel.hpp"
#include "sagin/config.hpp"

namespace sagin {

// Observation shared by both levels: serving cell, its rate, UAV position.
struct AgentState {
  int serving_bs = 0;
  double rate_bps = 0.0;
  Vec3 pos;

  bool operator==(const AgentState&) const = default;
};
using TopState = AgentState;
using LowState = AgentState;

inline constexpr int kStateDim = 7;
using EncodedState = std::array<double, kStateDim>;

// Network-input encoding: serving network one-hot (3), rate / R_max, position
// scaled to [0,1] by the world box.
EncodedState encode_state(const AgentState& s, const World& world, const EnvConfig& cfg);

enum class TopAction : int { Remain = 0, Switch = 1 };

struct TopOutcome {
  int serving_bs = 0;
  double reward = 0.0;
  double rate_reward = 0.0;    // r^R
  double switch_reward = 0.0;  // r^M in {0, -1}
  bool switched = false;
};

struct StepInfo {
  bool switched = false;  // association changed at this step's top decision
  double rate_bps = 0.0;
  double sinr_linear = 0.0;
  double distance_to_goal_m = 0.0;
  bool boundary_hit = false;
  bool arrived = false;
};

inline constexpr int kCostCount = 2;
using CostVector = std::array<double, kCostCount>;  // {qos, boundary}

struct StepOutcome {
  LowState next_state;
  double reward = 0.0;
  double rate_reward = 0.0;
  double goal_reward = 0.0;
  CostVector cost{0.0, 0.0};  // qos >= 0 (violation form), boundary in {0, -eta_bnd}
  bool done = false;
  Vec3 executed_direction;
  StepInfo info;
};

// Non-negative costs as consumed by the multiplier update.
CostVector violation_costs(const StepOutcome& o);

struct EpisodeCounters {
  int switch_count = 0;
  int step_count = 0;
  int qos_satisfied_steps = 0;
  double cumulative_rate = 0.0;

  bool operator==(const EpisodeCounters&) const = default;
};

EpisodeCounters record_transition_switch(EpisodeCounters c, int b_prev, int b_next);

// Brute-force count over a stored association sequence.
int count_switches(std::span<const int> associations);

// Strongest-RSRP GN, AN and SN cells, minus the serving cell. Networks with no
// cells contribute nothing. Ordered by descending RSRP.
std::vector<int> candidate_set(std::span<const LinkMeasurement> m, int serving_bs);

int argmax_rsrp(std::span<const LinkMeasurement> m);
int argmax_rate(std::span<const LinkMeasurement> m);
int argmax_sinr(std::span<const LinkMeasurement> m);

// Projects a unit direction so that its component along `goal_dir` is at
// least `min_cos` (returning `goal_dir` when nothing else remains).
Vec3 enforce_goalward(const Vec3& direction, const Vec3& goal_dir, double min_cos);

// Independent stream for (seed, a, b, c) via splitmix64 chaining.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

// Uniform start inside the box at least min_start_goal_m from the goal.
Vec3 sample_start(const WorldBox& box, const EnvConfig& cfg, Rng& rng);

class UavEnv {
 public:
  UavEnv(const World& world, const EnvConfig& cfg, Rng rng);

  // Throws DomainError when start == goal or either lies outside the box.
  TopState reset(const Vec3& start, const Vec3& goal);

  // Remain keeps the cell; Switch moves to the strongest-RSRP candidate.
  TopOutcome apply_top_action(TopAction action);
  // Directly sets the association (greedy top rules); reward as for the DDQN.
  TopOutcome apply_association(int new_serving);

  // `direction` must be unit-norm within 1e-6 (DomainError otherwise).
  StepOutcome apply_low_action(const Vec3& direction);

  const AgentState& state() const { return state_; }
  const EpisodeCounters& counters() const { return counters_; }
  std::span<const LinkMeasurement> measurements() const { return meas_; }
  std::span<const int> association_history() const { return history_; }
  double time() const { return t_; }
  const Vec3& goal() const { return goal_; }
  double d_max() const { return d_max_; }
  bool done() const { return done_; }
  const World& world() const { return *world_; }
  const EnvConfig& config() const { return cfg_; }

  double rate_reward(double rate_bps) const;
  double goal_reward(double distance_m) const;

 private:
  const World* world_;
  EnvConfig cfg_;
  Rng rng_;
  AgentState state_;
  EpisodeCounters counters_;
  std::vector<LinkMeasurement> meas_;
  std::vector<int> history_;
  Vec3 goal_;
  double d_max_ = 0.0;
  double t_ = 0.0;
  bool switched_pending_ = false;
  bool done_ = false;
};

}  // namespace sagin
