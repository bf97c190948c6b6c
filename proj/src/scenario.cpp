#include "sagin/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sagin {

BuildingMap generate_buildings(const BuildingParams& params, const WorldBox& bounds, std::uint64_t seed) {
  if (!(params.alpha > 0.0 && params.alpha < 1.0) || !(params.beta_per_km2 > 0.0) || !(params.gamma_m > 0.0))
    throw ConfigError("building parameters must satisfy 0 < alpha < 1, beta > 0, gamma > 0");
  const double w = bounds.hi.x - bounds.lo.x;
  const double h = bounds.hi.y - bounds.lo.y;
  if (!(w > 0.0 && h > 0.0)) throw ConfigError("building area is empty");

  BuildingMap map;
  map.params = params;
  map.seed = seed;
  const double area_km2 = w * h * 1e-6;
  const auto count = static_cast<std::size_t>(std::llround(params.beta_per_km2 * area_km2));
  if (count == 0) return map;

  const double side = std::sqrt(params.alpha / params.beta_per_km2) * 1000.0;
  const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(count) * w / h)));
  const auto rows = (count + cols - 1) / cols;
  const double cell_w = w / static_cast<double>(cols);
  const double cell_h = h / static_cast<double>(rows);

  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  map.boxes.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double base_x = bounds.lo.x + (static_cast<double>(k % cols) + 0.5) * cell_w;
    const double base_y = bounds.lo.y + (static_cast<double>(k / cols) + 0.5) * cell_h;
    const double slack_x = std::max(0.0, cell_w - side);
    const double slack_y = std::max(0.0, cell_h - side);
    const double cx = base_x + (unit(rng) - 0.5) * slack_x;
    const double cy = base_y + (unit(rng) - 0.5) * slack_y;
    // Rayleigh by inversion; u in [0,1) so the log argument is in (0,1].
    double height = 0.0;
    while (!(height > 0.0)) height = params.gamma_m * std::sqrt(-2.0 * std::log(1.0 - unit(rng)));

    const double x0 = std::max(bounds.lo.x, cx - 0.5 * side);
    const double x1 = std::min(bounds.hi.x, cx + 0.5 * side);
    const double y0 = std::max(bounds.lo.y, cy - 0.5 * side);
    const double y1 = std::min(bounds.hi.y, cy + 0.5 * side);
    Building b{0.5 * (x0 + x1), 0.5 * (y0 + y1), std::max(0.0, x1 - x0), std::max(0.0, y1 - y0), height};
    map.max_height = std::max(map.max_height, height);
    map.boxes.push_back(b);
  }
  return map;
}

namespace {

// Slab test restricted to the open parameter interval (0, 1).
bool segment_hits_box(const Vec3& a, const Vec3& d, const Building& b) {
  const double lo[3] = {b.cx - 0.5 * b.width, b.cy - 0.5 * b.depth, 0.0};
  const double hi[3] = {b.cx + 0.5 * b.width, b.cy + 0.5 * b.depth, b.height};
  const double p[3] = {a.x, a.y, a.z};
  const double v[3] = {d.x, d.y, d.z};
  double t0 = 0.0;
  double t1 = 1.0;
  for (int k = 0; k < 3; ++k) {
    if (v[k] == 0.0) {
      if (!(p[k] > lo[k] && p[k] < hi[k])) return false;
      continue;
    }
    double ta = (lo[k] - p[k]) / v[k];
    double tb = (hi[k] - p[k]) / v[k];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (!(t0 < t1)) return false;
  }
  return true;
}

bool lex_less(const Vec3& a, const Vec3& b) {
  if (a.x != b.x) return a.x < b.x;
  if (a.y != b.y) return a.y < b.y;
  return a.z < b.z;
}

}  // namespace

bool is_los(const Vec3& a_in, const Vec3& b_in, const BuildingMap& map) {
  // Canonical endpoint order makes the verdict exactly symmetric.
  const bool swap = lex_less(b_in, a_in);
  const Vec3& a = swap ? b_in : a_in;
  const Vec3& b = swap ? a_in : b_in;
  if (std::min(a.z, b.z) >= map.max_height) return true;
  const Vec3 d = b - a;
  const double min_x = std::min(a.x, b.x), max_x = std::max(a.x, b.x);
  const double min_y = std::min(a.y, b.y), max_y = std::max(a.y, b.y);
  const double min_z = std::min(a.z, b.z);
  for (const auto& box : map.boxes) {
    if (min_z >= box.height) continue;
    if (box.cx + 0.5 * box.width <= min_x || box.cx - 0.5 * box.width >= max_x) continue;
    if (box.cy + 0.5 * box.depth <= min_y || box.cy - 0.5 * box.depth >= max_y) continue;
    if (segment_hits_box(a, d, box)) return false;
  }
  return true;
}

Vec3 satellite_position(const SatelliteEphemeris& eph, double t) {
  const double speed = std::hypot(eph.velocity_x, eph.velocity_y);
  if (!(speed > 0.0) || !(eph.wrap_period_s > 0.0)) {
    return {eph.initial_x + eph.velocity_x * t, eph.initial_y + eph.velocity_y * t, eph.altitude_m};
  }
  const double ux = eph.velocity_x / speed;
  const double uy = eph.velocity_y / speed;
  const double half = 0.5 * speed * eph.wrap_period_s;
  const double rel_x = eph.initial_x - eph.window_center_x;
  const double rel_y = eph.initial_y - eph.window_center_y;
  const double along0 = rel_x * ux + rel_y * uy;
  const double cross_x = rel_x - along0 * ux;
  const double cross_y = rel_y - along0 * uy;
  // Offset from the window entry edge, advanced by the elapsed phase.
  const double tau = std::fmod(t, eph.wrap_period_s);
  double s = std::fmod(along0 + half + speed * tau, 2.0 * half);
  if (s < 0.0) s += 2.0 * half;
  const double along = s - half;
  return {eph.window_center_x + cross_x + along * ux, eph.window_center_y + cross_y + along * uy, eph.altitude_m};
}

namespace {

void validate_sites(const ScenarioConfig& sc) {
  int sn = 0;
  for (std::size_t i = 0; i < sc.sites.size(); ++i) {
    const auto& s = sc.sites[i];
    const std::string tag = "site " + std::to_string(i) + " (" + to_string(s.kind) + ")";
    if (!s.position.finite()) throw ConfigError(tag + ": non-finite position");
    if (!(s.bandwidth_hz > 0.0) || !(s.carrier_ghz > 0.0)) throw ConfigError(tag + ": bad radio parameters");
    for (const auto& sec : s.sectors)
      if (sec.array_rows < 1 || sec.array_cols < 1) throw ConfigError(tag + ": empty antenna array");
    if (s.kind == NetworkKind::SN) {
      ++sn;
      if (!s.ephemeris) throw ConfigError(tag + ": satellite without ephemeris");
      if (!(s.ephemeris->altitude_m > 0.0)) throw ConfigError(tag + ": altitude must be positive");
      if (s.sectors.size() != 1 || s.sectors[0].tilt_deg != 90.0)
        throw ConfigError(tag + ": satellites carry exactly one nadir-pointing beam");
    } else {
      if (s.sectors.size() != 3) throw ConfigError(tag + ": terrestrial/aerial sites carry exactly 3 sectors");
      const double expect[3] = {0.0, 120.0, 240.0};
      for (int k = 0; k < 3; ++k)
        if (s.sectors[static_cast<std::size_t>(k)].azimuth_deg != expect[k])
          throw ConfigError(tag + ": sectors must point at azimuths 0/120/240");
      const auto& box = sc.box;
      if (s.position.x < box.lo.x || s.position.x > box.hi.x || s.position.y < box.lo.y || s.position.y > box.hi.y)
        throw ConfigError(tag + ": site outside the world box");
    }
    for (std::size_t j = 0; j < i; ++j)
      if (distance(sc.sites[j].position, s.position) < 1.0)
        throw ConfigError(tag + ": overlaps site " + std::to_string(j));
  }
  if (sn == 0) throw ConfigError("scenario needs at least one satellite for SN coverage");
}

}  // namespace

World World::deploy(const ScenarioConfig& scenario, const ChannelConfig& channel) {
  const auto& box = scenario.box;
  if (!(box.lo.x < box.hi.x && box.lo.y < box.hi.y && box.lo.z < box.hi.z)) throw ConfigError("world box is empty");
  if (channel.fading_draws < 1) throw ConfigError("fading_draws must be >= 1");
  validate_sites(scenario);

  World w;
  w.scenario_ = scenario;
  w.channel_ = channel;
  w.buildings_ = generate_buildings(scenario.buildings, box, scenario.building_seed);
  // Cells are numbered network by network (GN, AN, SN), site order within.
  for (NetworkKind kind : {NetworkKind::GN, NetworkKind::AN, NetworkKind::SN}) {
    for (std::size_t i = 0; i < scenario.sites.size(); ++i) {
      const auto& s = scenario.sites[i];
      if (s.kind != kind) continue;
      for (std::size_t k = 0; k < s.sectors.size(); ++k) {
        Cell c{static_cast<int>(w.cells_.size()), kind, static_cast<int>(i), static_cast<int>(k)};
        w.by_kind_[static_cast<int>(kind)].push_back(c.id);
        w.cells_.push_back(c);
      }
    }
  }
  for (NetworkKind kind : {NetworkKind::GN, NetworkKind::AN, NetworkKind::SN}) {
    const auto& ids = w.by_kind_[static_cast<int>(kind)];
    const double bw = ids.empty() ? 1e6 : w.site(w.cells_[static_cast<std::size_t>(ids[0])].site).bandwidth_hz;
    w.noise_w_[static_cast<int>(kind)] =
        dbm_to_watts(channel.noise_psd_dbm_hz + channel.noise_figure_db + 10.0 * std::log10(bw));
  }
  return w;
}

Vec3 World::antenna_position(const Cell& c, double t) const {
  const auto& s = site(c.site);
  if (s.kind == NetworkKind::SN) return satellite_position(*s.ephemeris, t);
  return s.position;
}

bool World::inside(const Vec3& p) const {
  const auto& b = scenario_.box;
  return p.x >= b.lo.x && p.x <= b.hi.x && p.y >= b.lo.y && p.y <= b.hi.y && p.z >= b.lo.z && p.z <= b.hi.z;
}

}  // namespace sagin
