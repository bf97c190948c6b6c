#include <doctest.h>

#include <cmath>

#include "sagin/channel.hpp"

using namespace sagin;

namespace {

Vec3 boresight(const SectorSpec& s) {
  const double az = s.azimuth_deg * kPi / 180.0;
  const double el = -s.tilt_deg * kPi / 180.0;
  return {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
}

}  // namespace

TEST_CASE("antenna gain at boresight, behind the array and under mirror symmetry") {
  const SectorSpec upa{30.0, 10.0, 8, 8, 8.0};
  CHECK(antenna_gain_db(upa, boresight(upa)) == doctest::Approx(8.0 + 10.0 * std::log10(64.0)).epsilon(1e-12));

  const SectorSpec gn{120.0, 10.0, 4, 2, 8.0};
  CHECK(antenna_gain_db(gn, -boresight(gn)) <= 8.0 - 30.0);
  // Every direction in the rear hemisphere respects the front-to-back floor.
  for (int i = 0; i < 36; ++i) {
    for (int j = -8; j <= 8; ++j) {
      const double a = i * 10.0 * kPi / 180.0, e = j * 10.0 * kPi / 180.0;
      const Vec3 d{std::cos(e) * std::cos(a), std::cos(e) * std::sin(a), std::sin(e)};
      if (d.dot(boresight(gn)) < 0.0) CHECK(antenna_gain_db(gn, d) <= 8.0 - 30.0 + 1e-9);
    }
  }

  // Azimuth offsets of +-delta around a level boresight.
  const SectorSpec level{0.0, 0.0, 4, 2, 8.0};
  for (double delta : {5.0, 17.0, 40.0}) {
    const double r = delta * kPi / 180.0;
    const double plus = antenna_gain_db(level, {std::cos(r), std::sin(r), 0.0});
    const double minus = antenna_gain_db(level, {std::cos(r), -std::sin(r), 0.0});
    CHECK(plus == doctest::Approx(minus).epsilon(1e-12));
    CHECK(std::isfinite(plus));
  }
}

TEST_CASE("path loss") {
  SUBCASE("satellite free space against Friis") {
    const double d = 550e3, f = 2.185e9;
    const double friis = 20.0 * std::log10(4.0 * kPi * d * f / kSpeedOfLight);
    CHECK(path_loss_db(NetworkKind::SN, true, d, 2.185, 150.0) == doctest::Approx(friis).epsilon(1e-4));
    CHECK(friis == doctest::Approx(154.05).epsilon(1e-4));
  }
  SUBCASE("LoS exponent and ordering") {
    const double a = path_loss_db(NetworkKind::GN, true, 200.0, 6.7, 150.0);
    const double b = path_loss_db(NetworkKind::GN, true, 400.0, 6.7, 150.0);
    CHECK(b - a == doctest::Approx(22.0 * std::log10(2.0)).epsilon(1e-12));
    CHECK(b - a == doctest::Approx(6.62).epsilon(1e-3));
    for (double d : {10.0, 100.0, 1000.0, 3000.0})
      CHECK(path_loss_db(NetworkKind::GN, false, d, 6.7, 120.0) >= path_loss_db(NetworkKind::GN, true, d, 6.7, 120.0));
  }
  SUBCASE("monotone in distance") {
    Rng rng(5);
    std::uniform_real_distribution<double> u(1.0, 5000.0);
    for (int i = 0; i < 500; ++i) {
      double d1 = u(rng), d2 = u(rng);
      if (d1 > d2) std::swap(d1, d2);
      for (auto kind : {NetworkKind::GN, NetworkKind::AN, NetworkKind::SN})
        for (bool los : {true, false})
          CHECK(path_loss_db(kind, los, d1, 4.9, 180.0) <= path_loss_db(kind, los, d2, 4.9, 180.0));
    }
  }
  SUBCASE("non-positive distance") {
    CHECK_THROWS_AS(path_loss_db(NetworkKind::GN, true, 0.0, 6.7, 100.0), DomainError);
    CHECK_THROWS_AS(path_loss_db(NetworkKind::SN, true, -1.0, 2.0, 100.0), DomainError);
  }
}

TEST_CASE("fading has unit mean and is reproducible") {
  for (FadingModel m : {FadingModel{FadingKind::Rayleigh, 0.0}, FadingModel{FadingKind::Rician, 15.0},
                        FadingModel{FadingKind::Rician, 0.0}}) {
    Rng rng(42);
    double sum = 0.0;
    const int n = 1'000'000;
    for (int i = 0; i < n; ++i) {
      const double g = draw_fading(m, rng);
      REQUIRE(g >= 0.0);
      sum += g;
    }
    CHECK(sum / n >= 0.99);
    CHECK(sum / n <= 1.01);
  }
  Rng a(9), b(9);
  for (int i = 0; i < 100; ++i) CHECK(draw_fading({FadingKind::Rayleigh, 0.0}, a) == draw_fading({FadingKind::Rayleigh, 0.0}, b));
  Rng c(1);
  for (int i = 0; i < 10; ++i) CHECK(draw_fading({FadingKind::Rician, INFINITY}, c) == 1.0);
}

TEST_CASE("received power and SINR arithmetic") {
  CHECK(received_power_w(46.0, 120.0, 20.0, 0.0) == 0.0);
  CHECK(received_power_w(46.0, 100.0, 0.0, 1.0) == doctest::Approx(std::pow(10.0, 4.6 - 10.0 - 3.0)).epsilon(1e-12));
  CHECK(received_power_w(46.0, 100.0, 0.0, 1.0) == doctest::Approx(3.98e-9).epsilon(1e-3));
  CHECK(received_power_w(46.0, 100.0, 0.0, 2.0) == doctest::Approx(2.0 * received_power_w(46.0, 100.0, 0.0, 1.0)));

  const double one[] = {1e-10};
  CHECK(sinr(1e-9, one, 1e-13) == doctest::Approx(1e-9 / (1e-10 + 1e-13)).epsilon(1e-14));
  CHECK(sinr(1e-9, one, 1e-13) == doctest::Approx(9.990).epsilon(1e-4));
  CHECK(sinr(1e-9, {}, 1e-13) == doctest::Approx(1e4));
  const double two[] = {1e-10, 1e-12};
  CHECK(sinr(1e-9, two, 1e-13) < sinr(1e-9, one, 1e-13));
  CHECK_THROWS_AS(sinr(1e-9, one, 0.0), DomainError);
}

TEST_CASE("expected rate") {
  const LinkContribution unit{1e-12, {FadingKind::Rician, INFINITY}};
  Rng rng(1);
  CHECK(expected_rate(1e6, unit, {}, 1e-12, 16, rng) == 1e6);

  const LinkContribution los{5e-12, {FadingKind::Rician, 15.0}};
  const LinkContribution intf[] = {{1e-12, {FadingKind::Rayleigh, 0.0}}};
  Rng r1(3);
  double single = 0.0;
  const int reps = 10000;
  for (int i = 0; i < reps; ++i) single += expected_rate(1e6, los, intf, 1e-12, 1, r1);
  Rng r2(4);
  const double many = expected_rate(1e6, los, intf, 1e-12, 10000, r2);
  CHECK(single / reps == doctest::Approx(many).epsilon(0.05));

  Rng r3(8), r4(8);
  CHECK(expected_rate(2e6, los, intf, 1e-12, 16, r3) == doctest::Approx(2.0 * expected_rate(1e6, los, intf, 1e-12, 16, r4)).epsilon(1e-14));
}

TEST_CASE("measure_all covers every cell and keeps networks isolated") {
  Config cfg = default_config();
  const World w = World::deploy(cfg.scenario, cfg.channel);
  const Vec3 uav{700.0, 900.0, 150.0};
  Rng rng(21);
  const auto m = measure_all(w, uav, 3.0, rng);
  REQUIRE(m.size() == 20);
  for (std::size_t i = 0; i < m.size(); ++i) {
    CHECK(m[i].bs_id == static_cast<int>(i));
    CHECK(m[i].rate_bps >= 0.0);
    CHECK(m[i].sinr_linear > 0.0);
  }

  for (auto& s : cfg.scenario.sites)
    if (s.kind == NetworkKind::SN) s.tx_power_dbm += 13.0;
  const World w2 = World::deploy(cfg.scenario, cfg.channel);
  Rng rng2(21);
  const auto m2 = measure_all(w2, uav, 3.0, rng2);
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i].kind == NetworkKind::SN) continue;
    CHECK(m[i].sinr_linear == m2[i].sinr_linear);
    CHECK(m[i].rate_bps == m2[i].rate_bps);
  }

  CHECK_THROWS_AS(measure_all(w, {-1.0, 0.0, 150.0}, 0.0, rng), DomainError);
  CHECK_THROWS_AS(measure_all(w, {100.0, 100.0, 50.0}, 0.0, rng), DomainError);
}

TEST_CASE("measure_all GN entry matches a hand-composed pipeline") {
  const Config cfg = default_config();
  const World w = World::deploy(cfg.scenario, cfg.channel);
  const Vec3 uav{620.0, 410.0, 140.0};
  const double t = 2.0;
  Rng rng(77);
  Rng oracle_rng = rng;
  const auto m = measure_all(w, uav, t, rng);

  const auto gn = w.cells_of(NetworkKind::GN);
  std::vector<double> mean;
  std::vector<FadingModel> fade;
  for (int id : gn) {
    const Cell& c = w.cell(id);
    const StationSite& site = w.site(c.site);
    const Vec3 bs = site.position;
    const double d = (uav - bs).norm();
    const bool los = is_los(bs, uav, w.buildings());
    const double pl = path_loss_db(NetworkKind::GN, los, d, site.carrier_ghz, uav.z);
    const double g = antenna_gain_db(w.sector(c), (uav - bs).normalized());
    mean.push_back(received_power_w(site.tx_power_dbm, pl, g, 1.0));
    fade.push_back(los ? FadingModel{FadingKind::Rician, 15.0} : FadingModel{FadingKind::Rayleigh, 0.0});
  }
  const std::size_t target = 4;
  double acc = 0.0, first = 0.0;
  const double noise = dbm_to_watts(-174.0 + 7.0 + 60.0);
  for (int k = 0; k < cfg.channel.fading_draws; ++k) {
    std::vector<double> inst;
    for (std::size_t i = 0; i < gn.size(); ++i) inst.push_back(mean[i] * draw_fading(fade[i], oracle_rng));
    std::vector<double> others;
    for (std::size_t j = 0; j < gn.size(); ++j)
      if (j != target) others.push_back(inst[j]);
    const double s = sinr(inst[target], others, noise);
    if (k == 0) first = s;
    acc += std::log2(1.0 + s);
  }
  const auto& got = m[static_cast<std::size_t>(gn[target])];
  CHECK(got.rsrp_dbm == doctest::Approx(watts_to_dbm(mean[target])).epsilon(1e-12));
  CHECK(got.sinr_linear == doctest::Approx(first).epsilon(1e-12));
  CHECK(got.rate_bps == doctest::Approx(1e6 * acc / cfg.channel.fading_draws).epsilon(1e-12));
}

TEST_CASE("mirror-image sectors see equal RSRP") {
  Config cfg = default_config();
  cfg.scenario.sites.clear();
  cfg.scenario.sites.push_back(make_sector_site(NetworkKind::GN, 1200.0, 1000.0, 25.0));
  for (auto& s : make_satellites(cfg.scenario.box, 1, 100e3)) cfg.scenario.sites.push_back(s);
  const World w = World::deploy(cfg.scenario, cfg.channel);
  // Due west of the site: the 120 and 240 degree sectors mirror each other about the line of sight.
  const auto m = measure_rsrp(w, {1000.0, 1000.0, 250.0}, 0.0);
  CHECK(m[1].rsrp_dbm == doctest::Approx(m[2].rsrp_dbm).epsilon(1e-12));
  CHECK(m[0].rsrp_dbm < m[1].rsrp_dbm);
}
