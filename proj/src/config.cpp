#include "sagin/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace sagin {

using nlohmann::json;

StationSite make_sector_site(NetworkKind kind, double x, double y, double height_m) {
  StationSite s;
  s.kind = kind;
  s.position = {x, y, height_m};
  s.tx_power_dbm = 46.0;
  s.bandwidth_hz = 1e6;
  s.carrier_ghz = kind == NetworkKind::GN ? 6.7 : 4.9;
  const double tilt = kind == NetworkKind::GN ? 10.0 : -10.0;
  for (double az : {0.0, 120.0, 240.0}) s.sectors.push_back({az, tilt, 4, 2, 8.0});
  return s;
}

std::vector<StationSite> make_satellites(const WorldBox& box, int count, double window_half_width_m,
                                         double altitude_m, double speed_mps) {
  std::vector<StationSite> out;
  const double cx = 0.5 * (box.lo.x + box.hi.x);
  const double cy = 0.5 * (box.lo.y + box.hi.y);
  const double period = 2.0 * window_half_width_m / speed_mps;
  for (int k = 0; k < count; ++k) {
    SatelliteEphemeris e;
    e.altitude_m = altitude_m;
    e.initial_x = cx - window_half_width_m + k * (2.0 * window_half_width_m / count);
    e.initial_y = cy;
    e.velocity_x = speed_mps;
    e.velocity_y = 0.0;
    e.wrap_period_s = period;
    e.window_center_x = cx;
    e.window_center_y = cy;
    StationSite s;
    s.kind = NetworkKind::SN;
    s.position = {e.initial_x, e.initial_y, altitude_m};
    s.sectors.push_back({0.0, 90.0, 8, 8, 8.0});
    s.tx_power_dbm = 46.0;
    s.carrier_ghz = 2.185;
    s.bandwidth_hz = 1e6;
    s.ephemeris = e;
    out.push_back(s);
  }
  return out;
}

Config default_config() {
  Config c;
  auto& sc = c.scenario;
  sc.box = WorldBox{{0.0, 0.0, 100.0}, {2000.0, 2000.0, 300.0}};
  sc.sites.push_back(make_sector_site(NetworkKind::GN, 500.0, 500.0, 25.0));
  sc.sites.push_back(make_sector_site(NetworkKind::GN, 1500.0, 500.0, 25.0));
  sc.sites.push_back(make_sector_site(NetworkKind::GN, 1000.0, 1500.0, 25.0));
  sc.sites.push_back(make_sector_site(NetworkKind::AN, 1000.0, 700.0, 50.0));
  sc.sites.push_back(make_sector_site(NetworkKind::AN, 500.0, 1500.0, 50.0));
  sc.sites.push_back(make_sector_site(NetworkKind::AN, 1500.0, 1500.0, 50.0));
  for (auto& s : make_satellites(sc.box, 2, 100e3)) sc.sites.push_back(s);
  c.env.goal = {1800.0, 1800.0, 200.0};
  c.env.min_start_goal_m = 600.0;
  // sagin calibrate --preset default --episodes 10 --seed 1
  c.env.r_min_bps = 807676.8136197698;
  c.env.r_max_bps = 5975156.305318673;
  return c;
}

Config scaled_config() {
  Config c;
  auto& sc = c.scenario;
  sc.box = WorldBox{{0.0, 0.0, 100.0}, {500.0, 500.0, 200.0}};
  sc.sites.push_back(make_sector_site(NetworkKind::GN, 150.0, 180.0, 25.0));
  sc.sites.push_back(make_sector_site(NetworkKind::AN, 340.0, 330.0, 50.0));
  for (auto& s : make_satellites(sc.box, 2, 100e3)) sc.sites.push_back(s);
  c.env.goal = {450.0, 450.0, 150.0};
  c.env.min_start_goal_m = 250.0;
  c.env.max_steps = 80;
  // sagin calibrate --preset scaled --episodes 10 --seed 1
  c.env.r_min_bps = 362335.74721320794;
  c.env.r_max_bps = 17647083.75619436;
  c.train.episodes = 600;
  c.train.uav_count = 1;
  return c;
}

namespace {

void check(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

void validate(const Config& c) {
  check(c.schema_version == kConfigSchemaVersion,
        "config schema version " + std::to_string(c.schema_version) + " is not supported (expected " +
            std::to_string(kConfigSchemaVersion) + ")");
  const auto& box = c.scenario.box;
  check(box.lo.finite() && box.hi.finite(), "world box must be finite");
  check(box.lo.x < box.hi.x && box.lo.y < box.hi.y && box.lo.z < box.hi.z, "world box is empty");
  const auto& b = c.scenario.buildings;
  check(b.alpha > 0.0 && b.alpha < 1.0, "building alpha must lie in (0,1)");
  check(b.beta_per_km2 > 0.0, "building beta must be positive");
  check(b.gamma_m > 0.0, "building gamma must be positive");
  check(c.channel.fading_draws >= 1, "fading_draws must be >= 1");
  const auto& e = c.env;
  check(e.speed_mps > 0.0 && e.dt_s > 0.0, "speed and dt must be positive");
  check(e.max_steps >= 1, "max_steps must be >= 1");
  check(e.r_max_bps > e.r_min_bps, "rate normalisation bounds must satisfy r_min < r_max");
  check(e.r_req_bps > 0.0, "r_req must be positive");
  check(e.eta_bnd > 0.0, "eta_bnd must be positive");
  check(e.hold_steps >= 1, "hold_steps must be >= 1");
  check(e.goalward_min_cos >= 0.0 && e.goalward_min_cos < 1.0, "goalward_min_cos must lie in [0,1)");
  check(e.goal.x >= box.lo.x && e.goal.x <= box.hi.x && e.goal.y >= box.lo.y && e.goal.y <= box.hi.y &&
            e.goal.z >= box.lo.z && e.goal.z <= box.hi.z,
        "goal must lie inside the world box");
  // A buffer smaller than a batch is legal; that level simply never updates.
  check(c.ddqn.batch_size >= 1 && c.ddqn.buffer_capacity >= 1, "ddqn batch size and buffer capacity must be >= 1");
  check(c.csac.batch_size >= 1 && c.csac.buffer_capacity >= 1, "csac batch size and buffer capacity must be >= 1");
  check(c.ddqn.sync_period >= 1, "ddqn sync period must be >= 1");
  check(c.ddqn.eps_final <= c.ddqn.eps_init, "eps_final must not exceed eps_init");
  check(c.csac.initial_alpha > 0.0, "initial alpha must be positive");
  check(c.csac.cost_thresholds.size() == 2 && c.csac.initial_lambdas.size() == 2,
        "csac expects two costs (qos, boundary)");
  for (double l : c.csac.initial_lambdas) check(l >= 0.0, "initial multipliers must be non-negative");
  check(c.train.uav_count >= 1, "uav_count must be >= 1");
  check(c.train.episodes >= 0, "episodes must be >= 0");
  check(c.train.checkpoint_every >= 0, "checkpoint_every must be >= 0");
  check(c.train.eval_every >= 0, "eval_every must be >= 0");
  check(c.train.eval_episodes >= 1, "eval_episodes must be >= 1");
}

// ---- JSON -------------------------------------------------------------------

namespace {

json vec_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

Vec3 vec_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json site_json(const StationSite& s) {
  json j;
  j["kind"] = to_string(s.kind);
  j["position"] = vec_json(s.position);
  j["tx_power_dbm"] = s.tx_power_dbm;
  j["carrier_ghz"] = s.carrier_ghz;
  j["bandwidth_hz"] = s.bandwidth_hz;
  j["sectors"] = json::array();
  for (const auto& sec : s.sectors) {
    j["sectors"].push_back({{"azimuth_deg", sec.azimuth_deg},
                            {"tilt_deg", sec.tilt_deg},
                            {"array_rows", sec.array_rows},
                            {"array_cols", sec.array_cols},
                            {"element_gain_dbi", sec.element_gain_dbi}});
  }
  if (s.ephemeris) {
    const auto& e = *s.ephemeris;
    j["ephemeris"] = {{"altitude_m", e.altitude_m},
                      {"initial_xy", {e.initial_x, e.initial_y}},
                      {"velocity_xy", {e.velocity_x, e.velocity_y}},
                      {"wrap_period_s", e.wrap_period_s},
                      {"window_center_xy", {e.window_center_x, e.window_center_y}}};
  }
  return j;
}

StationSite site_from(const json& j) {
  StationSite s;
  s.kind = network_kind_from_string(j.at("kind").get<std::string>());
  s.position = vec_from(j.at("position"));
  s.tx_power_dbm = j.at("tx_power_dbm").get<double>();
  s.carrier_ghz = j.at("carrier_ghz").get<double>();
  s.bandwidth_hz = j.at("bandwidth_hz").get<double>();
  for (const auto& sj : j.at("sectors")) {
    s.sectors.push_back({sj.at("azimuth_deg").get<double>(), sj.at("tilt_deg").get<double>(),
                         sj.at("array_rows").get<int>(), sj.at("array_cols").get<int>(),
                         sj.at("element_gain_dbi").get<double>()});
  }
  if (j.contains("ephemeris")) {
    const auto& ej = j.at("ephemeris");
    SatelliteEphemeris e;
    e.altitude_m = ej.at("altitude_m").get<double>();
    e.initial_x = ej.at("initial_xy").at(0).get<double>();
    e.initial_y = ej.at("initial_xy").at(1).get<double>();
    e.velocity_x = ej.at("velocity_xy").at(0).get<double>();
    e.velocity_y = ej.at("velocity_xy").at(1).get<double>();
    e.wrap_period_s = ej.at("wrap_period_s").get<double>();
    e.window_center_x = ej.at("window_center_xy").at(0).get<double>();
    e.window_center_y = ej.at("window_center_xy").at(1).get<double>();
    s.ephemeris = e;
  }
  return s;
}

json to_json_value(const Config& c) {
  json j;
  j["schema_version"] = c.schema_version;
  const auto& sc = c.scenario;
  j["scenario"]["box"] = {{"lo", vec_json(sc.box.lo)}, {"hi", vec_json(sc.box.hi)}};
  j["scenario"]["buildings"] = {{"alpha", sc.buildings.alpha},
                                {"beta_per_km2", sc.buildings.beta_per_km2},
                                {"gamma_m", sc.buildings.gamma_m},
                                {"seed", sc.building_seed}};
  j["scenario"]["sites"] = json::array();
  for (const auto& s : sc.sites) j["scenario"]["sites"].push_back(site_json(s));

  j["channel"] = {{"noise_psd_dbm_hz", c.channel.noise_psd_dbm_hz},
                  {"noise_figure_db", c.channel.noise_figure_db},
                  {"fading_draws", c.channel.fading_draws},
                  {"rician_k_db", c.channel.rician_k_db}};

  const auto& e = c.env;
  j["env"] = {{"lambda1", e.lambda1},
              {"lambda2", e.lambda2},
              {"lambda3", e.lambda3},
              {"eta_bnd", e.eta_bnd},
              {"r_req_bps", e.r_req_bps},
              {"r_min_bps", e.r_min_bps},
              {"r_max_bps", e.r_max_bps},
              {"speed_mps", e.speed_mps},
              {"dt_s", e.dt_s},
              {"max_steps", e.max_steps},
              {"arrival_radius_m", e.arrival_radius_m},
              {"goal", vec_json(e.goal)},
              {"min_start_goal_m", e.min_start_goal_m},
              {"goalward_min_cos", e.goalward_min_cos},
              {"hold_steps", e.hold_steps}};

  const auto& d = c.ddqn;
  j["ddqn"] = {{"hidden", d.hidden},
               {"eps_init", d.eps_init},
               {"eps_final", d.eps_final},
               {"eps_decay_fraction", d.eps_decay_fraction},
               {"buffer_capacity", d.buffer_capacity},
               {"batch_size", d.batch_size},
               {"gamma", d.gamma},
               {"sync_period", d.sync_period},
               {"lr", d.lr}};

  const auto& s = c.csac;
  j["csac"] = {{"hidden", s.hidden},
               {"buffer_capacity", s.buffer_capacity},
               {"batch_size", s.batch_size},
               {"gamma", s.gamma},
               {"tau", s.tau},
               {"lr", s.lr},
               {"alpha_lr", s.alpha_lr},
               {"initial_alpha", s.initial_alpha},
               {"target_entropy", s.target_entropy},
               {"lambda_lr", s.lambda_lr},
               {"cost_thresholds", s.cost_thresholds},
               {"initial_lambdas", s.initial_lambdas},
               {"constrained", s.constrained}};

  j["train"] = {{"episodes", c.train.episodes},
                {"uav_count", c.train.uav_count},
                {"seed", c.train.seed},
                {"checkpoint_every", c.train.checkpoint_every},
                {"eval_every", c.train.eval_every},
                {"eval_episodes", c.train.eval_episodes}};
  return j;
}

Config from_json_value(const json& j) {
  Config c;
  c.schema_version = j.at("schema_version").get<int>();
  if (c.schema_version != kConfigSchemaVersion)
    throw ConfigError("config schema version " + std::to_string(c.schema_version) +
                      " is not supported (expected " + std::to_string(kConfigSchemaVersion) + ")");
  const auto& sj = j.at("scenario");
  c.scenario.box.lo = vec_from(sj.at("box").at("lo"));
  c.scenario.box.hi = vec_from(sj.at("box").at("hi"));
  const auto& bj = sj.at("buildings");
  c.scenario.buildings = {bj.at("alpha").get<double>(), bj.at("beta_per_km2").get<double>(),
                          bj.at("gamma_m").get<double>()};
  c.scenario.building_seed = bj.at("seed").get<std::uint64_t>();
  for (const auto& s : sj.at("sites")) c.scenario.sites.push_back(site_from(s));

  const auto& cj = j.at("channel");
  c.channel.noise_psd_dbm_hz = cj.at("noise_psd_dbm_hz").get<double>();
  c.channel.noise_figure_db = cj.at("noise_figure_db").get<double>();
  c.channel.fading_draws = cj.at("fading_draws").get<int>();
  c.channel.rician_k_db = cj.at("rician_k_db").get<double>();

  const auto& ej = j.at("env");
  auto& e = c.env;
  e.lambda1 = ej.at("lambda1").get<double>();
  e.lambda2 = ej.at("lambda2").get<double>();
  e.lambda3 = ej.at("lambda3").get<double>();
  e.eta_bnd = ej.at("eta_bnd").get<double>();
  e.r_req_bps = ej.at("r_req_bps").get<double>();
  e.r_min_bps = ej.at("r_min_bps").get<double>();
  e.r_max_bps = ej.at("r_max_bps").get<double>();
  e.speed_mps = ej.at("speed_mps").get<double>();
  e.dt_s = ej.at("dt_s").get<double>();
  e.max_steps = ej.at("max_steps").get<int>();
  e.arrival_radius_m = ej.at("arrival_radius_m").get<double>();
  e.goal = vec_from(ej.at("goal"));
  e.min_start_goal_m = ej.at("min_start_goal_m").get<double>();
  e.goalward_min_cos = ej.at("goalward_min_cos").get<double>();
  e.hold_steps = ej.at("hold_steps").get<int>();

  const auto& dj = j.at("ddqn");
  auto& d = c.ddqn;
  d.hidden = dj.at("hidden").get<std::vector<int>>();
  d.eps_init = dj.at("eps_init").get<double>();
  d.eps_final = dj.at("eps_final").get<double>();
  d.eps_decay_fraction = dj.at("eps_decay_fraction").get<double>();
  d.buffer_capacity = dj.at("buffer_capacity").get<int>();
  d.batch_size = dj.at("batch_size").get<int>();
  d.gamma = dj.at("gamma").get<double>();
  d.sync_period = dj.at("sync_period").get<int>();
  d.lr = dj.at("lr").get<double>();

  const auto& cs = j.at("csac");
  auto& s = c.csac;
  s.hidden = cs.at("hidden").get<std::vector<int>>();
  s.buffer_capacity = cs.at("buffer_capacity").get<int>();
  s.batch_size = cs.at("batch_size").get<int>();
  s.gamma = cs.at("gamma").get<double>();
  s.tau = cs.at("tau").get<double>();
  s.lr = cs.at("lr").get<double>();
  s.alpha_lr = cs.at("alpha_lr").get<double>();
  s.initial_alpha = cs.at("initial_alpha").get<double>();
  s.target_entropy = cs.at("target_entropy").get<double>();
  s.lambda_lr = cs.at("lambda_lr").get<double>();
  s.cost_thresholds = cs.at("cost_thresholds").get<std::vector<double>>();
  s.initial_lambdas = cs.at("initial_lambdas").get<std::vector<double>>();
  s.constrained = cs.at("constrained").get<bool>();

  const auto& tj = j.at("train");
  c.train.episodes = tj.at("episodes").get<int>();
  c.train.uav_count = tj.at("uav_count").get<int>();
  c.train.seed = tj.at("seed").get<std::uint64_t>();
  c.train.checkpoint_every = tj.at("checkpoint_every").get<int>();
  c.train.eval_every = tj.at("eval_every").get<int>();
  c.train.eval_episodes = tj.at("eval_episodes").get<int>();
  return c;
}

}  // namespace

std::string to_json(const Config& cfg) { return to_json_value(cfg).dump(2); }

Config config_from_json(const std::string& text) {
  try {
    Config c = from_json_value(json::parse(text));
    validate(c);
    return c;
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("malformed config: ") + ex.what());
  }
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

void save_config(const Config& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file " + path);
  out << to_json(cfg) << '\n';
}

}  // namespace sagin
