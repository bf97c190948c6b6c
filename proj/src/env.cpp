#include "sagin/env.hpp"

#include <algorithm>
#include <cmath>

namespace sagin {

EncodedState encode_state(const AgentState& s, const World& world, const EnvConfig& cfg) {
  const auto& box = world.box();
  EncodedState e{};
  e[static_cast<int>(world.cell(s.serving_bs).kind)] = 1.0;
  e[3] = s.rate_bps / cfg.r_max_bps;
  e[4] = (s.pos.x - box.lo.x) / (box.hi.x - box.lo.x);
  e[5] = (s.pos.y - box.lo.y) / (box.hi.y - box.lo.y);
  e[6] = (s.pos.z - box.lo.z) / (box.hi.z - box.lo.z);
  return e;
}

CostVector violation_costs(const StepOutcome& o) { return {o.cost[0], -o.cost[1]}; }

EpisodeCounters record_transition_switch(EpisodeCounters c, int b_prev, int b_next) {
  if (b_prev != b_next) ++c.switch_count;
  return c;
}

int count_switches(std::span<const int> a) {
  int n = 0;
  for (std::size_t i = 1; i < a.size(); ++i) n += a[i] != a[i - 1] ? 1 : 0;
  return n;
}

namespace {

template <class Key>
int argmax_by(std::span<const LinkMeasurement> m, Key key) {
  if (m.empty()) throw DomainError("argmax over an empty measurement set");
  std::size_t best = 0;
  for (std::size_t i = 1; i < m.size(); ++i)
    if (key(m[i]) > key(m[best])) best = i;
  return m[best].bs_id;
}

}  // namespace

int argmax_rsrp(std::span<const LinkMeasurement> m) {
  return argmax_by(m, [](const LinkMeasurement& x) { return x.rsrp_dbm; });
}
int argmax_rate(std::span<const LinkMeasurement> m) {
  return argmax_by(m, [](const LinkMeasurement& x) { return x.rate_bps; });
}
int argmax_sinr(std::span<const LinkMeasurement> m) {
  return argmax_by(m, [](const LinkMeasurement& x) { return x.sinr_linear; });
}

std::vector<int> candidate_set(std::span<const LinkMeasurement> m, int serving_bs) {
  std::vector<const LinkMeasurement*> best(kNetworkKinds, nullptr);
  for (const auto& x : m) {
    auto& slot = best[static_cast<int>(x.kind)];
    if (!slot || x.rsrp_dbm > slot->rsrp_dbm) slot = &x;
  }
  std::vector<const LinkMeasurement*> picked;
  for (const auto* p : best)
    if (p && p->bs_id != serving_bs) picked.push_back(p);
  std::stable_sort(picked.begin(), picked.end(),
                   [](const LinkMeasurement* a, const LinkMeasurement* b) { return a->rsrp_dbm > b->rsrp_dbm; });
  std::vector<int> out;
  for (const auto* p : picked) out.push_back(p->bs_id);
  return out;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(seed);
  h = mix(h ^ a);
  h = mix(h ^ b);
  return mix(h ^ c);
}

Vec3 sample_start(const WorldBox& box, const EnvConfig& cfg, Rng& rng) {
  auto coord = [&rng](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const Vec3 p{coord(box.lo.x, box.hi.x), coord(box.lo.y, box.hi.y), coord(box.lo.z, box.hi.z)};
    if ((p - cfg.goal).norm() >= cfg.min_start_goal_m) return p;
  }
  throw ConfigError("no start position satisfies min_start_goal_m inside the box");
}

Vec3 enforce_goalward(const Vec3& d, const Vec3& g, double min_cos) {
  const double c = d.dot(g);
  if (c > 0.0 && c >= min_cos) return d;
  const Vec3 perp = d - g * c;
  const double pn = perp.norm();
  if (pn < 1e-12) return g;
  const double cs = std::max(min_cos, 1e-6);
  return (perp * (std::sqrt(1.0 - cs * cs) / pn) + g * cs).normalized();
}

UavEnv::UavEnv(const World& world, const EnvConfig& cfg, Rng rng) : world_(&world), cfg_(cfg), rng_(rng) {}

double UavEnv::rate_reward(double rate_bps) const {
  return (rate_bps - cfg_.r_min_bps) / (cfg_.r_max_bps - cfg_.r_min_bps);
}

double UavEnv::goal_reward(double d) const { return (d_max_ - d) / d_max_; }

TopState UavEnv::reset(const Vec3& start, const Vec3& goal) {
  if (!world_->inside(start) || !world_->inside(goal)) throw DomainError("reset: start and goal must lie inside the world box");
  if (distance(start, goal) <= 0.0) throw DomainError("reset: start equals goal");
  goal_ = goal;
  d_max_ = distance(start, goal);
  t_ = 0.0;
  counters_ = {};
  done_ = false;
  switched_pending_ = false;
  meas_ = measure_all(*world_, start, t_, rng_);
  state_.pos = start;
  state_.serving_bs = argmax_rsrp(meas_);
  state_.rate_bps = meas_[static_cast<std::size_t>(state_.serving_bs)].rate_bps;
  history_.assign(1, state_.serving_bs);
  return state_;
}

TopOutcome UavEnv::apply_association(int new_serving) {
  if (new_serving < 0 || new_serving >= world_->cell_count()) throw DomainError("association target out of range");
  TopOutcome o;
  o.serving_bs = new_serving;
  o.switched = new_serving != state_.serving_bs;
  o.switch_reward = o.switched ? -1.0 : 0.0;
  const double rate = meas_[static_cast<std::size_t>(new_serving)].rate_bps;
  o.rate_reward = rate_reward(rate);
  o.reward = cfg_.lambda1 * o.rate_reward + cfg_.lambda2 * o.switch_reward;
  state_.serving_bs = new_serving;
  state_.rate_bps = rate;
  switched_pending_ = switched_pending_ || o.switched;
  return o;
}

TopOutcome UavEnv::apply_top_action(TopAction action) {
  if (action == TopAction::Remain) return apply_association(state_.serving_bs);
  const auto cands = candidate_set(meas_, state_.serving_bs);
  if (cands.empty()) throw std::logic_error("empty candidate set");
  return apply_association(cands.front());
}

StepOutcome UavEnv::apply_low_action(const Vec3& direction) {
  if (!direction.finite() || std::abs(direction.norm() - 1.0) > 1e-6)
    throw DomainError("apply_low_action: direction must be a unit vector");
  if (meas_.empty() || done_) throw DomainError("apply_low_action: episode not running (call reset)");
  const Vec3 to_goal = goal_ - state_.pos;
  const Vec3 gdir = to_goal.norm() > 0.0 ? to_goal.normalized() : direction;
  const Vec3 dir = enforce_goalward(direction, gdir, cfg_.goalward_min_cos);

  Vec3 next = state_.pos + dir * (cfg_.speed_mps * cfg_.dt_s);
  const auto& box = world_->box();
  const Vec3 clamped{std::clamp(next.x, box.lo.x, box.hi.x), std::clamp(next.y, box.lo.y, box.hi.y),
                     std::clamp(next.z, box.lo.z, box.hi.z)};
  const bool boundary = !(clamped == next);
  next = clamped;

  t_ += cfg_.dt_s;
  meas_ = measure_all(*world_, next, t_, rng_);
  const auto& serving = meas_[static_cast<std::size_t>(state_.serving_bs)];

  StepOutcome o;
  o.executed_direction = dir;
  o.next_state = {state_.serving_bs, serving.rate_bps, next};
  const double d = distance(next, goal_);
  o.rate_reward = rate_reward(serving.rate_bps);
  o.goal_reward = goal_reward(d);
  o.reward = cfg_.lambda1 * o.rate_reward + cfg_.lambda3 * o.goal_reward;
  o.cost[0] = std::max(0.0, (cfg_.r_req_bps - serving.rate_bps) / cfg_.r_req_bps);
  o.cost[1] = boundary ? -cfg_.eta_bnd : 0.0;

  counters_ = record_transition_switch(counters_, history_.back(), state_.serving_bs);
  history_.push_back(state_.serving_bs);
  ++counters_.step_count;
  if (serving.rate_bps >= cfg_.r_req_bps) ++counters_.qos_satisfied_steps;
  counters_.cumulative_rate += serving.rate_bps;

  o.info.switched = switched_pending_;
  o.info.rate_bps = serving.rate_bps;
  o.info.sinr_linear = serving.sinr_linear;
  o.info.distance_to_goal_m = d;
  o.info.boundary_hit = boundary;
  o.info.arrived = d <= cfg_.arrival_radius();
  o.done = o.info.arrived || counters_.step_count >= cfg_.max_steps;
  switched_pending_ = false;

  state_ = o.next_state;
  done_ = o.done;
  return o;
}

}  // namespace sagin
