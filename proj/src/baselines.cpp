#include "sagin/baselines.hpp"

namespace sagin {

PolicySpec policy_spec(std::string_view name) {
  PolicySpec p;
  p.name = std::string(name);
  if (name == "hdrl") return p;
  if (name == "sl") {
    p.top = TopRule::MaxRsrp;
    p.low = LowRule::StraightLine;
  } else if (name == "drl") {
    p.top = TopRule::MaxSinr;
    p.low = LowRule::Flat;
  } else if (name == "rsrp-csac") {
    p.top = TopRule::MaxRsrp;
  } else if (name == "maxrate-csac") {
    p.top = TopRule::MaxRate;
  } else if (name == "ddqn-sac") {
    p.constrained = false;
  } else if (name == "ddqn-sl") {
    p.low = LowRule::StraightLine;
  } else if (name == "maxsinr") {
    p.top = TopRule::MaxSinr;
    p.low = LowRule::StraightLine;
  } else {
    throw ConfigError("unknown policy '" + std::string(name) + "'");
  }
  return p;
}

const std::vector<std::string>& policy_names() {
  static const std::vector<std::string> names{"hdrl",    "sl",       "drl",     "rsrp-csac",
                                              "maxrate-csac", "ddqn-sac", "ddqn-sl", "maxsinr"};
  return names;
}

Vec3 straight_line_direction(const Vec3& pos, const Vec3& goal) {
  const Vec3 d = goal - pos;
  if (!(d.norm() > 0.0)) throw DomainError("straight_line_direction: already at the goal");
  return d.normalized();
}

const std::array<Vec3, kFlatActionCount>& flat_directions() {
  static const std::array<Vec3, kFlatActionCount> dirs{Vec3{1, 0, 0},  Vec3{-1, 0, 0}, Vec3{0, 1, 0},
                                                       Vec3{0, -1, 0}, Vec3{0, 0, 1},  Vec3{0, 0, -1}};
  return dirs;
}

int greedy_association(TopRule rule, std::span<const LinkMeasurement> m) {
  switch (rule) {
    case TopRule::MaxRsrp:
      return argmax_rsrp(m);
    case TopRule::MaxRate:
      return argmax_rate(m);
    case TopRule::MaxSinr:
      return argmax_sinr(m);
    case TopRule::Ddqn:
      break;
  }
  throw DomainError("greedy_association: DDQN is not a greedy rule");
}

}  // namespace sagin
