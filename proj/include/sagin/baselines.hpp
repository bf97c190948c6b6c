#pragma once

// Comparison policies, each a composition of one association rule and one
// movement rule. All of them run through the same rollout code as HDRL.

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sagin/env.hpp"

namespace sagin {

enum class TopRule { Ddqn, MaxRsrp, MaxRate, MaxSinr };
enum class LowRule { Csac, StraightLine, Flat };

struct PolicySpec {
  std::string name;
  TopRule top = TopRule::Ddqn;
  LowRule low = LowRule::Csac;
  bool constrained = true;  // CSAC multipliers active

  bool uses_ddqn() const { return top == TopRule::Ddqn; }
  bool uses_csac() const { return low == LowRule::Csac; }
  bool uses_flat() const { return low == LowRule::Flat; }
  bool trainable() const { return uses_ddqn() || uses_csac() || uses_flat(); }
};

// hdrl, sl, drl, rsrp-csac, maxrate-csac, ddqn-sac, ddqn-sl, maxsinr.
// Throws ConfigError for unknown names.
PolicySpec policy_spec(std::string_view name);
const std::vector<std::string>& policy_names();

Vec3 straight_line_direction(const Vec3& pos, const Vec3& goal);

// Direct-RL discretisation: +x, -x, +y, -y, +z, -z.
inline constexpr int kFlatActionCount = 6;
const std::array<Vec3, kFlatActionCount>& flat_directions();

// Cell chosen by a greedy association rule (TopRule::Ddqn is not greedy).
int greedy_association(TopRule rule, std::span<const LinkMeasurement> m);

}  // namespace sagin
