#include "sagin/channel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sagin {

namespace {

constexpr double kDeg = 180.0 / kPi;

// |sum_{k<n} e^{j k psi}|^2
double array_power(int n, double psi) {
  const double s = std::sin(0.5 * psi);
  if (std::abs(s) < 1e-12) return static_cast<double>(n) * n;
  const double num = std::sin(0.5 * n * psi);
  return (num * num) / (s * s);
}

}  // namespace

double antenna_gain_db(const SectorSpec& sector, const Vec3& d) {
  const double az = sector.azimuth_deg / kDeg;
  const double el = -sector.tilt_deg / kDeg;
  const Vec3 bore{std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
  const Vec3 horiz{-std::sin(az), std::cos(az), 0.0};
  const Vec3 vert{-std::sin(el) * std::cos(az), -std::sin(el) * std::sin(az), std::cos(el)};

  const double along = d.dot(bore);
  const double h = d.dot(horiz);
  const double v = std::clamp(d.dot(vert), -1.0, 1.0);
  const double phi_off = std::atan2(h, along) * kDeg;
  const double theta_off = std::asin(v) * kDeg;
  const double attenuation =
      std::min(12.0 * (theta_off / 65.0) * (theta_off / 65.0) + 12.0 * (phi_off / 65.0) * (phi_off / 65.0), 30.0);
  const double element_db = sector.element_gain_dbi - attenuation;

  const int m = sector.array_rows;
  const int n = sector.array_cols;
  const double af = array_power(m, kPi * v) * array_power(n, kPi * h) / static_cast<double>(m * n);
  double af_db = 10.0 * std::log10(std::max(af, 1e-6));
  // The planar array radiates into the front half-space only.
  if (along < 0.0) af_db = std::min(af_db, 0.0);
  return element_db + af_db;
}

double path_loss_db(NetworkKind kind, bool los, double d3d_m, double fc_ghz, double uav_height_m) {
  if (!(d3d_m > 0.0)) throw DomainError("path_loss: distance must be positive");
  if (kind == NetworkKind::SN) {
    // Free space: 32.45 + 20 log10(f / MHz) + 20 log10(d / km).
    return 32.45 + 20.0 * std::log10(fc_ghz * 1e3) + 20.0 * std::log10(d3d_m * 1e-3);
  }
  const double pl_los = 28.0 + 22.0 * std::log10(d3d_m) + 20.0 * std::log10(fc_ghz);
  if (los) return pl_los;
  const double pl_nlos =
      13.54 + 39.08 * std::log10(d3d_m) + 20.0 * std::log10(fc_ghz) - 0.6 * (uav_height_m - 1.5);
  return std::max(pl_los, pl_nlos);
}

double draw_fading(const FadingModel& model, Rng& rng) {
  const double x = std::normal_distribution<double>{}(rng);
  const double y = std::normal_distribution<double>{}(rng);
  if (model.kind == FadingKind::Rayleigh) return 0.5 * (x * x + y * y);
  if (std::isinf(model.rician_k_db) && model.rician_k_db > 0.0) return 1.0;
  const double k = db_to_linear(model.rician_k_db);
  const double los = std::sqrt(k / (k + 1.0));
  const double scatter = std::sqrt(1.0 / (2.0 * (k + 1.0)));
  const double re = los + scatter * x;
  const double im = scatter * y;
  return re * re + im * im;
}

double received_power_w(double tx_power_dbm, double pl_db, double gain_db, double fading) {
  return dbm_to_watts(tx_power_dbm) * db_to_linear(-pl_db) * db_to_linear(gain_db) * fading;
}

double sinr(double serving_w, std::span<const double> interferers_w, double noise_w) {
  if (!(noise_w > 0.0)) throw DomainError("sinr: noise power must be positive");
  double interference = 0.0;
  for (double p : interferers_w) interference += p;
  return serving_w / (interference + noise_w);
}

double expected_rate(double bandwidth_hz, const LinkContribution& serving,
                     std::span<const LinkContribution> interferers, double noise_w, int n_draws, Rng& rng) {
  if (n_draws < 1) throw DomainError("expected_rate: need at least one fading draw");
  std::vector<double> powers(interferers.size());
  double acc = 0.0;
  for (int k = 0; k < n_draws; ++k) {
    const double s = serving.mean_power_w * draw_fading(serving.fading, rng);
    for (std::size_t j = 0; j < interferers.size(); ++j)
      powers[j] = interferers[j].mean_power_w * draw_fading(interferers[j].fading, rng);
    acc += std::log2(1.0 + sinr(s, powers, noise_w));
  }
  return bandwidth_hz * acc / n_draws;
}

LinkBudget link_budget(const World& world, const Cell& cell, const Vec3& uav, double t) {
  const auto& site = world.site(cell.site);
  const Vec3 bs = world.antenna_position(cell, t);
  LinkBudget lb;
  lb.distance_m = distance(bs, uav);
  lb.los = cell.kind == NetworkKind::SN || is_los(bs, uav, world.buildings());
  lb.path_loss_db = path_loss_db(cell.kind, lb.los, lb.distance_m, site.carrier_ghz, uav.z);
  lb.gain_db = antenna_gain_db(world.sector(cell), (uav - bs).normalized());
  lb.mean_power_w = received_power_w(site.tx_power_dbm, lb.path_loss_db, lb.gain_db, 1.0);
  return lb;
}

FadingModel fading_for(const World& world, NetworkKind kind, bool los) {
  if (kind == NetworkKind::SN || los) return {FadingKind::Rician, world.channel().rician_k_db};
  return {FadingKind::Rayleigh, 0.0};
}

std::vector<LinkMeasurement> measure_rsrp(const World& world, const Vec3& uav, double t) {
  if (!world.inside(uav)) throw DomainError("measure: UAV position outside the world box");
  std::vector<LinkMeasurement> out;
  out.reserve(world.cells().size());
  for (const auto& c : world.cells()) {
    const LinkBudget lb = link_budget(world, c, uav, t);
    LinkMeasurement m;
    m.bs_id = c.id;
    m.kind = c.kind;
    m.los = lb.los;
    m.rsrp_dbm = watts_to_dbm(lb.mean_power_w);
    out.push_back(m);
  }
  return out;
}

std::vector<LinkMeasurement> measure_all(const World& world, const Vec3& uav, double t, Rng& rng) {
  if (!world.inside(uav)) throw DomainError("measure: UAV position outside the world box");
  std::vector<LinkMeasurement> out(world.cells().size());
  const int draws = world.channel().fading_draws;
  std::vector<double> mean;
  std::vector<FadingModel> fading;
  std::vector<double> inst;
  std::vector<double> others;
  std::vector<double> rate_acc;

  for (NetworkKind kind : {NetworkKind::GN, NetworkKind::AN, NetworkKind::SN}) {
    const auto ids = world.cells_of(kind);
    const std::size_t n = ids.size();
    if (n == 0) continue;
    mean.assign(n, 0.0);
    fading.assign(n, FadingModel{});
    for (std::size_t i = 0; i < n; ++i) {
      const Cell& c = world.cell(ids[i]);
      const LinkBudget lb = link_budget(world, c, uav, t);
      mean[i] = lb.mean_power_w;
      fading[i] = fading_for(world, kind, lb.los);
      auto& m = out[static_cast<std::size_t>(c.id)];
      m.bs_id = c.id;
      m.kind = kind;
      m.los = lb.los;
      m.rsrp_dbm = watts_to_dbm(lb.mean_power_w);
    }
    const double noise = world.noise_watts(kind);
    const double bw = world.site(world.cell(ids[0]).site).bandwidth_hz;
    inst.assign(n, 0.0);
    others.assign(n - 1, 0.0);
    rate_acc.assign(n, 0.0);
    for (int k = 0; k < draws; ++k) {
      for (std::size_t i = 0; i < n; ++i) inst[i] = mean[i] * draw_fading(fading[i], rng);
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t w = 0;
        for (std::size_t j = 0; j < n; ++j)
          if (j != i) others[w++] = inst[j];
        const double s = sinr(inst[i], others, noise);
        if (k == 0) out[static_cast<std::size_t>(ids[i])].sinr_linear = s;
        rate_acc[i] += std::log2(1.0 + s);
      }
    }
    for (std::size_t i = 0; i < n; ++i) out[static_cast<std::size_t>(ids[i])].rate_bps = bw * rate_acc[i] / draws;
  }
  return out;
}

}  // namespace sagin
