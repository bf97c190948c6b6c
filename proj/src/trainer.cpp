#include "sagin/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace sagin {

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kTrainerStream = 2;
constexpr std::uint64_t kEnvStream = 3;
constexpr std::uint64_t kStartStream = 4;
constexpr std::uint64_t kEvalEnvStream = 5;
constexpr std::uint64_t kEvalStartStream = 6;
constexpr std::uint64_t kPeriodicEvalStream = 7;

constexpr char kMagic[8] = {'S', 'A', 'G', 'I', 'N', 'C', 'K', 'P'};

struct Actors {
  const DdqnAgent* top = nullptr;
  const CsacAgent* low = nullptr;
  const DdqnAgent* flat = nullptr;
  bool explore = false;
};

struct UavSlot {
  UavEnv env;
  std::optional<TopTransition> pending_top;
  double top_return = 0.0;
  double low_return = 0.0;
};

struct StepRecord {
  std::optional<TopTransition> top;
  std::optional<LowTransition> low;
  std::optional<TopTransition> flat;
  TraceRow row;
};

Vec3 goal_direction(const UavEnv& env) {
  const Vec3 d = env.goal() - env.state().pos;
  return d.norm() > 0.0 ? d.normalized() : Vec3{1.0, 0.0, 0.0};
}

// One top decision (on hold boundaries) followed by one lower step.
StepRecord act_step(UavSlot& slot, const Actors& actors, const PolicySpec& spec, const Config& cfg, Rng& rng,
                    int episode, int step, int uav) {
  UavEnv& env = slot.env;
  StepRecord rec;
  const int hold = std::max(1, cfg.env.hold_steps);
  double r_top = 0.0;
  double switch_reward = 0.0;

  if (step % hold == 0) {
    TopOutcome top;
    if (spec.top == TopRule::Ddqn) {
      const EncodedState s = encode_state(env.state(), env.world(), cfg.env);
      const int a = actors.top->select_action(s, actors.explore, rng);
      top = env.apply_top_action(static_cast<TopAction>(a));
      slot.pending_top = TopTransition{s, a, top.reward, {}, false};
    } else {
      top = env.apply_association(greedy_association(spec.top, env.measurements()));
    }
    r_top = top.reward;
    switch_reward = top.switch_reward;
  }

  const EncodedState s_low = encode_state(env.state(), env.world(), cfg.env);
  Vec3 dir;
  RawAction raw{};
  int flat_action = 0;
  switch (spec.low) {
    case LowRule::Csac:
      if (actors.explore) {
        const auto sample = actors.low->sample_action(s_low, rng, goal_direction(env));
        dir = sample.direction;
        raw = sample.raw;
      } else {
        dir = actors.low->mean_action(s_low, goal_direction(env));
      }
      break;
    case LowRule::StraightLine:
      dir = straight_line_direction(env.state().pos, env.goal());
      break;
    case LowRule::Flat:
      flat_action = actors.flat->select_action(s_low, actors.explore, rng);
      dir = flat_directions()[static_cast<std::size_t>(flat_action)];
      break;
  }

  const StepOutcome out = env.apply_low_action(dir);
  const EncodedState s_next = encode_state(env.state(), env.world(), cfg.env);

  if (spec.low == LowRule::Csac)
    rec.low = LowTransition{s_low, raw, out.reward, violation_costs(out), s_next, out.done};
  if (spec.low == LowRule::Flat) {
    const double r = out.reward + cfg.env.lambda2 * switch_reward;
    rec.flat = TopTransition{s_low, flat_action, r, s_next, out.done};
  }
  if (slot.pending_top && ((step + 1) % hold == 0 || out.done)) {
    slot.pending_top->next_state = s_next;
    slot.pending_top->done = out.done;
    rec.top = slot.pending_top;
    slot.pending_top.reset();
  }

  slot.top_return += r_top;
  slot.low_return += out.reward;

  const Vec3& p = env.state().pos;
  rec.row = TraceRow{episode,
                     step,
                     uav,
                     p,
                     env.state().serving_bs,
                     env.world().cell(env.state().serving_bs).kind,
                     linear_to_db(out.info.sinr_linear),
                     out.info.rate_bps,
                     out.info.switched,
                     r_top,
                     out.reward,
                     out.cost[0],
                     out.cost[1],
                     out.done};
  return rec;
}

Actors actors_of(const Agents& a, bool explore) {
  return Actors{a.top ? &*a.top : nullptr, a.low ? &*a.low : nullptr, a.flat ? &*a.flat : nullptr, explore};
}

void check_agents(const Agents& a, const PolicySpec& spec) {
  if (spec.uses_ddqn() && !a.top) throw ConfigError("policy '" + spec.name + "' needs a trained association agent");
  if (spec.uses_csac() && !a.low) throw ConfigError("policy '" + spec.name + "' needs a trained trajectory agent");
  if (spec.uses_flat() && !a.flat) throw ConfigError("policy '" + spec.name + "' needs a trained flat agent");
}

std::vector<UavSlot> make_slots(const World& world, const Config& cfg, std::uint64_t seed, std::uint64_t env_stream,
                                std::uint64_t start_stream, int episode) {
  std::vector<UavSlot> slots;
  const auto e = static_cast<std::uint64_t>(episode);
  for (int u = 0; u < cfg.train.uav_count; ++u) {
    const auto uu = static_cast<std::uint64_t>(u);
    Rng start_rng(derive_seed(seed, start_stream, e, uu));
    slots.push_back(UavSlot{UavEnv(world, cfg.env, Rng(derive_seed(seed, env_stream, e, uu))), {}, 0.0, 0.0});
    slots.back().env.reset(sample_start(world.box(), cfg.env, start_rng), cfg.env.goal);
  }
  return slots;
}

// Transition (de)serialisation for the replay buffers.
void write_state(BinaryWriter& w, const EncodedState& s) {
  for (double v : s) w.f64(v);
}
EncodedState read_state(BinaryReader& r) {
  EncodedState s{};
  for (double& v : s) v = r.f64();
  return s;
}
void write_top(BinaryWriter& w, const TopTransition& t) {
  write_state(w, t.state);
  w.u32(static_cast<std::uint32_t>(t.action));
  w.f64(t.reward);
  write_state(w, t.next_state);
  w.u8(t.done ? 1 : 0);
}
TopTransition read_top(BinaryReader& r) {
  TopTransition t;
  t.state = read_state(r);
  t.action = static_cast<int>(r.u32());
  t.reward = r.f64();
  t.next_state = read_state(r);
  t.done = r.u8() != 0;
  return t;
}
void write_low(BinaryWriter& w, const LowTransition& t) {
  write_state(w, t.state);
  for (double v : t.action) w.f64(v);
  w.f64(t.reward);
  for (double v : t.cost) w.f64(v);
  write_state(w, t.next_state);
  w.u8(t.done ? 1 : 0);
}
LowTransition read_low(BinaryReader& r) {
  LowTransition t;
  t.state = read_state(r);
  for (double& v : t.action) v = r.f64();
  t.reward = r.f64();
  for (double& v : t.cost) v = r.f64();
  t.next_state = read_state(r);
  t.done = r.u8() != 0;
  return t;
}

std::uint64_t fnv1a(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : data) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

Agents make_agents(const Config& cfg, const PolicySpec& spec, std::uint64_t seed) {
  Rng init(derive_seed(seed, kInitStream));
  Agents a;
  if (spec.uses_ddqn()) a.top.emplace(cfg.ddqn, kStateDim, 2, init);
  if (spec.uses_csac()) {
    CsacConfig c = cfg.csac;
    c.constrained = c.constrained && spec.constrained;
    a.low.emplace(c, kStateDim, init);
  }
  if (spec.uses_flat()) a.flat.emplace(cfg.ddqn, kStateDim, kFlatActionCount, init);
  return a;
}

Trainer::Trainer(const Config& cfg, std::string_view policy)
    : cfg_(cfg),
      spec_(policy_spec(policy)),
      world_(std::make_shared<const World>(World::deploy(cfg.scenario, cfg.channel))),
      agents_(make_agents(cfg, spec_, cfg.train.seed)),
      top_buf_(static_cast<std::size_t>(cfg.ddqn.buffer_capacity)),
      low_buf_(static_cast<std::size_t>(cfg.csac.buffer_capacity)),
      flat_buf_(static_cast<std::size_t>(cfg.ddqn.buffer_capacity)),
      rng_(derive_seed(cfg.train.seed, kTrainerStream)) {
  validate(cfg_);
}

void Trainer::learn(EpisodeLogRow& acc, int& ddqn_n, int& csac_n) {
  try {
    if (agents_.top) {
      const auto b = static_cast<std::size_t>(agents_.top->config().batch_size);
      if (top_buf_.size() >= b) {
        acc.ddqn_loss += agents_.top->train_batch(top_buf_.sample(b, rng_));
        ++ddqn_n;
        ++counters_.ddqn_updates;
      }
      if (agents_.top->maybe_sync_target(counters_.env_steps)) ++counters_.target_syncs;
    }
    if (agents_.low) {
      const auto b = static_cast<std::size_t>(agents_.low->config().batch_size);
      if (low_buf_.size() >= b) {
        const auto st = agents_.low->update_cycle(low_buf_.sample(b, rng_), rng_);
        acc.critic1_loss += st.critic1_loss;
        acc.critic2_loss += st.critic2_loss;
        acc.actor_loss += st.actor_loss;
        ++csac_n;
        ++counters_.csac_cycles;
      }
    }
    if (agents_.flat) {
      const auto b = static_cast<std::size_t>(agents_.flat->config().batch_size);
      if (flat_buf_.size() >= b) {
        acc.ddqn_loss += agents_.flat->train_batch(flat_buf_.sample(b, rng_));
        ++ddqn_n;
        ++counters_.flat_updates;
      }
      if (agents_.flat->maybe_sync_target(counters_.env_steps)) ++counters_.target_syncs;
    }
  } catch (const TrainingError& e) {
    if (!diagnostic_path.empty()) {
      try {
        save_checkpoint(diagnostic_path);
      } catch (const std::exception&) {
        // The original training error is the one worth reporting.
      }
    }
    throw TrainingError(std::string(e.what()) + " (episode " + std::to_string(episode_) + ", env step " +
                        std::to_string(counters_.env_steps) + ")");
  }
}

EpisodeLogRow Trainer::run_episode(const TrainHooks& hooks) {
  const int e = episode_;
  if (agents_.top) agents_.top->set_epsilon(DdqnAgent::epsilon_for_episode(cfg_.ddqn, e, cfg_.train.episodes));
  if (agents_.flat) agents_.flat->set_epsilon(DdqnAgent::epsilon_for_episode(cfg_.ddqn, e, cfg_.train.episodes));

  const Agents snapshot = agents_;
  const Actors actors = actors_of(snapshot, true);
  auto slots = make_slots(*world_, cfg_, cfg_.train.seed, kEnvStream, kStartStream, e);

  EpisodeLogRow row;
  row.episode = e;
  int ddqn_n = 0, csac_n = 0;
  double rate_sum = 0.0;
  int steps = 0, satisfied = 0;
  bool alive = true;
  for (int step = 0; alive; ++step) {
    alive = false;
    for (std::size_t u = 0; u < slots.size(); ++u) {
      if (slots[u].env.done()) continue;
      StepRecord rec = act_step(slots[u], actors, spec_, cfg_, rng_, e, step, static_cast<int>(u));
      if (rec.top) top_buf_.push(*rec.top);
      if (rec.low) low_buf_.push(*rec.low);
      if (rec.flat) flat_buf_.push(*rec.flat);
      ++counters_.env_steps;
      learn(row, ddqn_n, csac_n);
      rate_sum += rec.row.rate_bps;
      satisfied += rec.row.rate_bps >= cfg_.env.r_req_bps ? 1 : 0;
      ++steps;
      if (hooks.on_step) hooks.on_step(rec.row);
      alive = alive || !slots[u].env.done();
    }
  }

  const auto n_uav = static_cast<double>(slots.size());
  for (const auto& s : slots) {
    row.top_return += s.top_return / n_uav;
    row.low_return += s.low_return / n_uav;
    row.switches += s.env.counters().switch_count / n_uav;
  }
  if (ddqn_n > 0) row.ddqn_loss /= ddqn_n;
  if (csac_n > 0) {
    row.critic1_loss /= csac_n;
    row.critic2_loss /= csac_n;
    row.actor_loss /= csac_n;
  }
  if (agents_.low) {
    row.alpha = agents_.low->alpha();
    row.lambda_qos = agents_.low->lambdas()[0];
    row.lambda_bnd = agents_.low->lambdas()[1];
  }
  if (agents_.top) row.epsilon = agents_.top->epsilon();
  if (agents_.flat) row.epsilon = agents_.flat->epsilon();
  row.mean_rate_bps = steps > 0 ? rate_sum / steps : 0.0;
  row.qos_ratio = steps > 0 ? static_cast<double>(satisfied) / steps : 0.0;
  row.steps = steps / n_uav;

  ++episode_;
  if (hooks.on_episode) hooks.on_episode(row);
  return row;
}

std::vector<EpisodeLogRow> Trainer::train(int max_episodes, const TrainHooks& hooks) {
  std::vector<EpisodeLogRow> rows;
  int left = cfg_.train.episodes - episode_;
  if (max_episodes >= 0) left = std::min(left, max_episodes);
  for (int i = 0; i < left; ++i) {
    rows.push_back(run_episode(hooks));
    if (hooks.on_eval && cfg_.train.eval_every > 0 && episode_ % cfg_.train.eval_every == 0)
      hooks.on_eval(episode_, evaluate(agents_, *world_, cfg_, spec_, cfg_.train.eval_episodes,
                                       periodic_eval_seed(cfg_)));
    if (cfg_.train.checkpoint_every > 0 && !checkpoint_path.empty() && episode_ % cfg_.train.checkpoint_every == 0)
      save_checkpoint(checkpoint_path);
  }
  return rows;
}

std::string Trainer::checkpoint_bytes() const {
  BinaryWriter p;
  p.str(to_json(cfg_));
  p.str(spec_.name);
  p.u32(static_cast<std::uint32_t>(episode_));
  p.u64(counters_.env_steps);
  p.u64(counters_.ddqn_updates);
  p.u64(counters_.csac_cycles);
  p.u64(counters_.flat_updates);
  p.u64(counters_.target_syncs);
  std::ostringstream rs;
  rs << rng_;
  p.str(rs.str());
  p.u8(agents_.top ? 1 : 0);
  if (agents_.top) agents_.top->save(p);
  p.u8(agents_.low ? 1 : 0);
  if (agents_.low) agents_.low->save(p);
  p.u8(agents_.flat ? 1 : 0);
  if (agents_.flat) agents_.flat->save(p);
  p.tag("buffers");
  top_buf_.save(p, write_top);
  low_buf_.save(p, write_low);
  flat_buf_.save(p, write_top);
  const std::string payload = p.take();

  BinaryWriter out;
  std::string head(kMagic, sizeof kMagic);
  out.u32(kCheckpointVersion);
  out.u64(payload.size());
  std::string bytes = head + out.take() + payload;
  BinaryWriter tail;
  tail.u64(fnv1a(payload));
  return bytes + tail.take();
}

Trainer Trainer::from_checkpoint_bytes(std::string_view bytes) {
  if (bytes.size() < sizeof kMagic + 4 + 8 + 8 || bytes.substr(0, sizeof kMagic) != std::string_view(kMagic, 8))
    throw CheckpointError("not a checkpoint file");
  BinaryReader head(bytes.substr(sizeof kMagic, 12));
  const std::uint32_t version = head.u32();
  if (version != kCheckpointVersion)
    throw CheckpointError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  const std::uint64_t size = head.u64();
  const std::size_t off = sizeof kMagic + 12;
  if (bytes.size() != off + size + 8) throw CheckpointError("checkpoint truncated or padded");
  const std::string_view payload = bytes.substr(off, size);
  BinaryReader tail(bytes.substr(off + size));
  if (tail.u64() != fnv1a(payload)) throw CheckpointError("checkpoint checksum mismatch");

  BinaryReader r(payload);
  Trainer t;
  try {
    t.cfg_ = config_from_json(r.str());
    validate(t.cfg_);
    t.spec_ = policy_spec(r.str());
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint config: ") + e.what());
  }
  t.episode_ = static_cast<int>(r.u32());
  t.counters_.env_steps = r.u64();
  t.counters_.ddqn_updates = r.u64();
  t.counters_.csac_cycles = r.u64();
  t.counters_.flat_updates = r.u64();
  t.counters_.target_syncs = r.u64();
  std::istringstream rs(r.str());
  rs >> t.rng_;
  if (!rs) throw CheckpointError("checkpoint: bad rng state");
  if (r.u8()) t.agents_.top = DdqnAgent::load(r);
  if (r.u8()) t.agents_.low = CsacAgent::load(r);
  if (r.u8()) t.agents_.flat = DdqnAgent::load(r);
  check_agents(t.agents_, t.spec_);
  r.expect_tag("buffers");
  t.top_buf_ = ReplayBuffer<TopTransition>::load(r, read_top);
  t.low_buf_ = ReplayBuffer<LowTransition>::load(r, read_low);
  t.flat_buf_ = ReplayBuffer<TopTransition>::load(r, read_top);
  if (!r.done()) throw CheckpointError("checkpoint: trailing bytes");
  t.world_ = std::make_shared<const World>(World::deploy(t.cfg_.scenario, t.cfg_.channel));
  return t;
}

void Trainer::save_checkpoint(const std::string& path) const {
  const std::string bytes = checkpoint_bytes();
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError("cannot write " + tmp);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw CheckpointError("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Trainer Trainer::load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open checkpoint " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return from_checkpoint_bytes(ss.str());
}

EvalResult evaluate(const Agents& agents, const World& world, const Config& cfg, const PolicySpec& spec,
                    int n_episodes, std::uint64_t seed) {
  check_agents(agents, spec);
  if (n_episodes < 1) throw DomainError("evaluate: n_episodes must be positive");
  const Actors actors = actors_of(agents, false);
  Rng unused(seed);
  EvalResult res;
  for (int e = 0; e < n_episodes; ++e) {
    auto slots = make_slots(world, cfg, seed, kEvalEnvStream, kEvalStartStream, e);
    std::vector<std::vector<TraceRow>> rows(slots.size());
    bool alive = true;
    for (int step = 0; alive; ++step) {
      alive = false;
      for (std::size_t u = 0; u < slots.size(); ++u) {
        if (slots[u].env.done()) continue;
        rows[u].push_back(act_step(slots[u], actors, spec, cfg, unused, e, step, static_cast<int>(u)).row);
        alive = alive || !slots[u].env.done();
      }
    }
    for (std::size_t u = 0; u < slots.size(); ++u) {
      res.episodes.push_back(compute_metrics(rows[u], cfg.env.r_req_bps, cfg.env.dt_s));
      res.trace.insert(res.trace.end(), rows[u].begin(), rows[u].end());
    }
  }
  res.fleet = aggregate(res.episodes);
  return res;
}

std::uint64_t periodic_eval_seed(const Config& cfg) { return derive_seed(cfg.train.seed, kPeriodicEvalStream); }

}  // namespace sagin
