#pragma once

#include <span>
#include <vector>

#include "sagin/scenario.hpp"

namespace sagin {

struct LinkMeasurement {
  int bs_id = 0;
  NetworkKind kind = NetworkKind::GN;
  double rsrp_dbm = 0.0;     // fading-averaged received power
  double sinr_linear = 0.0;  // SINR of this step's first fading realisation
  double rate_bps = 0.0;     // bandwidth * mean log2(1 + SINR) over the fading draws
  bool los = true;
};

enum class FadingKind { Rayleigh, Rician };

struct FadingModel {
  FadingKind kind = FadingKind::Rayleigh;
  double rician_k_db = 15.0;  // +inf gives the deterministic unit gain
};

// BS antenna gain toward a unit direction (BS -> UAV): element pattern plus the
// array factor of a half-wavelength M x N planar array steered to boresight.
double antenna_gain_db(const SectorSpec& sector, const Vec3& direction);

// GN/AN: UMa-style LoS/NLoS expressions; SN: free space. Throws DomainError for d <= 0.
double path_loss_db(NetworkKind kind, bool los, double d3d_m, double fc_ghz, double uav_height_m);

// Unit-mean power gain. Always consumes the same number of random variates.
double draw_fading(const FadingModel& model, Rng& rng);

double received_power_w(double tx_power_dbm, double path_loss_db, double antenna_gain_db, double fading);

// Throws DomainError for noise_w <= 0.
double sinr(double serving_w, std::span<const double> interferers_w, double noise_w);

struct LinkContribution {
  double mean_power_w = 0.0;
  FadingModel fading;
};

// bandwidth * mean_k log2(1 + SINR_k), each draw fading every link independently.
double expected_rate(double bandwidth_hz, const LinkContribution& serving,
                     std::span<const LinkContribution> interferers, double noise_w, int n_draws, Rng& rng);

// Large-scale link budget of one cell at a UAV position.
struct LinkBudget {
  bool los = true;
  double distance_m = 0.0;
  double path_loss_db = 0.0;
  double gain_db = 0.0;
  double mean_power_w = 0.0;
};

LinkBudget link_budget(const World& world, const Cell& cell, const Vec3& uav, double t);
FadingModel fading_for(const World& world, NetworkKind kind, bool los);

// One entry per cell in id order. Interference sums stay within a network.
// Throws DomainError when the UAV is outside the world box.
std::vector<LinkMeasurement> measure_all(const World& world, const Vec3& uav, double t, Rng& rng);

// Large-scale only (no fading draws, rate/sinr left zero). Used where only the
// association-relevant RSRP is needed.
std::vector<LinkMeasurement> measure_rsrp(const World& world, const Vec3& uav, double t);

}  // namespace sagin
