#pragma once

// Hierarchical training loop. All UAVs of an episode act round-robin against
// parameter snapshots taken at the episode start, while every transition
// feeds the shared replay buffers and agents (centralised training,
// decentralised execution).

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sagin/baselines.hpp"
#include "sagin/csac_agent.hpp"
#include "sagin/ddqn_agent.hpp"
#include "sagin/metrics.hpp"
#include "sagin/replay_buffer.hpp"

namespace sagin {

struct Agents {
  std::optional<DdqnAgent> top;   // association
  std::optional<CsacAgent> low;   // trajectory
  std::optional<DdqnAgent> flat;  // direct-RL baseline over flat_directions()
};

// Fresh agents for the levels `spec` learns, initialised from `seed`.
Agents make_agents(const Config& cfg, const PolicySpec& spec, std::uint64_t seed);

struct UpdateCounters {
  std::uint64_t env_steps = 0;
  std::uint64_t ddqn_updates = 0;
  std::uint64_t csac_cycles = 0;
  std::uint64_t flat_updates = 0;
  std::uint64_t target_syncs = 0;

  bool operator==(const UpdateCounters&) const = default;
};

struct EvalResult {
  std::vector<MetricSummary> episodes;  // one per (episode, uav)
  MetricSummary fleet;
  std::vector<TraceRow> trace;
};

struct TrainHooks {
  std::function<void(const TraceRow&)> on_step;
  std::function<void(const EpisodeLogRow&)> on_episode;
  // Called every train.eval_every episodes with a greedy evaluation of the
  // current agents. Evaluation only runs when this is set.
  std::function<void(int episodes_done, const EvalResult&)> on_eval;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

class Trainer {
 public:
  Trainer(const Config& cfg, std::string_view policy);

  const Config& config() const { return cfg_; }
  const World& world() const { return *world_; }
  const PolicySpec& policy() const { return spec_; }
  const Agents& agents() const { return agents_; }
  Agents& mutable_agents() { return agents_; }
  int episodes_done() const { return episode_; }
  const UpdateCounters& counters() const { return counters_; }
  const ReplayBuffer<TopTransition>& top_buffer() const { return top_buf_; }
  const ReplayBuffer<LowTransition>& low_buffer() const { return low_buf_; }
  const ReplayBuffer<TopTransition>& flat_buffer() const { return flat_buf_; }

  EpisodeLogRow run_episode(const TrainHooks& hooks = {});
  // Runs until the configured episode budget (or `max_episodes` more) is spent.
  std::vector<EpisodeLogRow> train(int max_episodes = -1, const TrainHooks& hooks = {});

  std::string checkpoint_bytes() const;
  // Written to a temporary file and renamed into place.
  void save_checkpoint(const std::string& path) const;
  // Throws CheckpointError on version mismatch, corruption or truncation.
  static Trainer from_checkpoint_bytes(std::string_view bytes);
  static Trainer load_checkpoint(const std::string& path);

  // When set, a TrainingError first dumps a checkpoint here.
  std::string diagnostic_path;
  // When set with train.checkpoint_every > 0, train() saves here periodically.
  std::string checkpoint_path;

 private:
  Trainer() = default;
  void learn(EpisodeLogRow& acc, int& ddqn_n, int& csac_n);

  Config cfg_;
  PolicySpec spec_;
  std::shared_ptr<const World> world_;
  Agents agents_;
  ReplayBuffer<TopTransition> top_buf_;
  ReplayBuffer<LowTransition> low_buf_;
  ReplayBuffer<TopTransition> flat_buf_;
  Rng rng_;
  int episode_ = 0;
  UpdateCounters counters_;
};

// Greedy execution: eps = 0, mean actor action, no buffer writes or updates.
EvalResult evaluate(const Agents& agents, const World& world, const Config& cfg, const PolicySpec& spec,
                    int n_episodes, std::uint64_t seed);

// Seed of the periodic evaluations inside train(); fixed per run so the
// points of one run share their start positions and fading.
std::uint64_t periodic_eval_seed(const Config& cfg);

}  // namespace sagin
