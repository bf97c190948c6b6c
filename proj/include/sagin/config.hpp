#pragma once

// Every tunable of the testbed in one value type. The JSON form is the
// scenario config file; `schema_version` guards against stale files.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sagin/types.hpp"

namespace sagin {

inline constexpr int kConfigSchemaVersion = 1;

struct SectorSpec {
  double azimuth_deg = 0.0;
  // Positive values tilt the beam below the horizon. GN uses +10, AN uses -10
  // (a 10 degree uptilt), SN beams use +90 (pointing along [0,0,-1]).
  double tilt_deg = 0.0;
  int array_rows = 4;
  int array_cols = 2;
  double element_gain_dbi = 8.0;
};

struct SatelliteEphemeris {
  double altitude_m = 550e3;
  double initial_x = 0.0;
  double initial_y = 0.0;
  double velocity_x = 7500.0;
  double velocity_y = 0.0;
  double wrap_period_s = 0.0;
  // The along-track coordinate wraps inside a window of half-width
  // speed * wrap_period / 2 centred here.
  double window_center_x = 0.0;
  double window_center_y = 0.0;
};

struct StationSite {
  NetworkKind kind = NetworkKind::GN;
  Vec3 position;  // SN: position at t = 0
  std::vector<SectorSpec> sectors;
  double tx_power_dbm = 46.0;
  double carrier_ghz = 6.7;
  double bandwidth_hz = 1e6;
  std::optional<SatelliteEphemeris> ephemeris;  // SN only
};

struct WorldBox {
  Vec3 lo{0.0, 0.0, 100.0};
  Vec3 hi{2000.0, 2000.0, 300.0};
};

struct BuildingParams {
  double alpha = 0.3;          // built-up area ratio
  double beta_per_km2 = 300.0;  // buildings per square kilometre
  double gamma_m = 20.0;       // Rayleigh height scale
};

struct ScenarioConfig {
  WorldBox box;
  BuildingParams buildings;
  std::uint64_t building_seed = 7;
  std::vector<StationSite> sites;
};

struct ChannelConfig {
  double noise_psd_dbm_hz = -174.0;
  double noise_figure_db = 7.0;
  int fading_draws = 16;
  double rician_k_db = 15.0;
};

struct EnvConfig {
  double lambda1 = 1.0;  // rate weight
  double lambda2 = 0.5;  // switch penalty weight
  double lambda3 = 0.5;  // goal-approach weight
  double eta_bnd = 1.0;
  double r_req_bps = 2e6;
  double r_min_bps = 0.0;  // normalisation bounds, filled by calibration
  double r_max_bps = 1e7;
  double speed_mps = 10.0;
  double dt_s = 1.0;
  int max_steps = 300;
  double arrival_radius_m = 0.0;  // <= 0 means one step, speed * dt
  Vec3 goal{1800.0, 1800.0, 200.0};
  double min_start_goal_m = 600.0;
  // Executed directions keep at least this cosine with the goal direction.
  double goalward_min_cos = 0.05;
  int hold_steps = 1;  // lower-level steps per top-level decision

  double arrival_radius() const { return arrival_radius_m > 0.0 ? arrival_radius_m : speed_mps * dt_s; }
};

struct DdqnConfig {
  std::vector<int> hidden{128, 64};
  double eps_init = 0.5;
  double eps_final = 0.05;
  double eps_decay_fraction = 0.6;  // eps reaches eps_final at this fraction of the episode budget
  int buffer_capacity = 50000;
  int batch_size = 128;
  double gamma = 0.97;
  int sync_period = 200;
  double lr = 0.0005;
};

struct CsacConfig {
  std::vector<int> hidden{128, 64};
  int buffer_capacity = 50000;
  int batch_size = 128;
  double gamma = 0.99;
  double tau = 0.005;
  double lr = 0.0003;        // actor and critics
  double alpha_lr = 0.0003;  // log-temperature
  double initial_alpha = 0.2;
  double target_entropy = -3.0;
  double lambda_lr = 0.01;
  std::vector<double> cost_thresholds{0.05, 0.0};  // qos, boundary
  std::vector<double> initial_lambdas{0.0, 0.0};
  bool constrained = true;  // false: multipliers pinned at zero, costs ignored
};

struct TrainConfig {
  int episodes = 3000;
  int uav_count = 32;
  std::uint64_t seed = 1;
  int checkpoint_every = 0;  // episodes; 0 disables intermediate checkpoints
  int eval_every = 0;        // episodes between greedy evaluations; 0 disables
  int eval_episodes = 5;
};

struct Config {
  int schema_version = kConfigSchemaVersion;
  ScenarioConfig scenario;
  ChannelConfig channel;
  EnvConfig env;
  DdqnConfig ddqn;
  CsacConfig csac;
  TrainConfig train;
};

// Full urban scenario: 2 km x 2 km, 3 GN + 3 AN sites (9 cells each), 2 LEO satellites.
Config default_config();

// Desk-scale variant: 500 m x 500 m, 1 GN site, 1 AN site, 2 satellites, 1 UAV.
Config scaled_config();

// Adds `count` phase-offset satellites moving along +x over the box centre.
std::vector<StationSite> make_satellites(const WorldBox& box, int count, double window_half_width_m,
                                         double altitude_m = 550e3, double speed_mps = 7500.0);
StationSite make_sector_site(NetworkKind kind, double x, double y, double height_m);

void validate(const Config& cfg);

std::string to_json(const Config& cfg);
Config config_from_json(const std::string& text);
Config load_config(const std::string& path);
void save_config(const Config& cfg, const std::string& path);

}  // namespace sagin
