#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "sagin/config.hpp"
#include "sagin/types.hpp"

namespace sagin {

using Rng = std::mt19937_64;

// Axis-aligned building standing on z = 0.
struct Building {
  double cx = 0.0;
  double cy = 0.0;
  double width = 0.0;  // x extent
  double depth = 0.0;  // y extent
  double height = 0.0;

  bool operator==(const Building&) const = default;
};

struct BuildingMap {
  BuildingParams params;
  std::uint64_t seed = 0;
  std::vector<Building> boxes;
  double max_height = 0.0;
};

// Jittered-grid realisation of the ITU statistical city: round(beta * area)
// buildings of side sqrt(alpha / beta) with Rayleigh(gamma) heights.
BuildingMap generate_buildings(const BuildingParams& params, const WorldBox& bounds, std::uint64_t seed);

// True iff the open segment (a, b) passes through no building interior.
bool is_los(const Vec3& a, const Vec3& b, const BuildingMap& map);

Vec3 satellite_position(const SatelliteEphemeris& eph, double t);

struct Cell {
  int id = 0;
  NetworkKind kind = NetworkKind::GN;
  int site = 0;
  int sector = 0;
};

// Immutable world after construction; shareable across rollout workers.
class World {
 public:
  // Validates and deploys. Throws ConfigError on inconsistent input.
  static World deploy(const ScenarioConfig& scenario, const ChannelConfig& channel);

  const ScenarioConfig& scenario() const { return scenario_; }
  const ChannelConfig& channel() const { return channel_; }
  const WorldBox& box() const { return scenario_.box; }
  const BuildingMap& buildings() const { return buildings_; }

  std::span<const Cell> cells() const { return cells_; }
  const Cell& cell(int id) const { return cells_.at(static_cast<std::size_t>(id)); }
  std::span<const int> cells_of(NetworkKind kind) const { return by_kind_[static_cast<int>(kind)]; }
  int cell_count() const { return static_cast<int>(cells_.size()); }

  const StationSite& site(int index) const { return scenario_.sites.at(static_cast<std::size_t>(index)); }
  const SectorSpec& sector(const Cell& c) const { return site(c.site).sectors.at(static_cast<std::size_t>(c.sector)); }
  Vec3 antenna_position(const Cell& c, double t) const;

  double noise_watts(NetworkKind kind) const { return noise_w_[static_cast<int>(kind)]; }
  bool inside(const Vec3& p) const;

 private:
  World() = default;

  ScenarioConfig scenario_;
  ChannelConfig channel_;
  BuildingMap buildings_;
  std::vector<Cell> cells_;
  std::vector<int> by_kind_[kNetworkKinds];
  double noise_w_[kNetworkKinds]{};
};

}  // namespace sagin
