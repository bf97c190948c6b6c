#pragma once

// Per-step trace rows, episode metrics, the versioned trace / summary / log
// formats and rate-bound calibration.

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sagin/env.hpp"

namespace sagin {

struct TraceRow {
  int episode = 0;
  int step = 0;
  int uav_id = 0;
  Vec3 pos;
  int serving_bs = 0;
  NetworkKind kind = NetworkKind::GN;
  double sinr_db = 0.0;
  double rate_bps = 0.0;
  bool switched = false;
  double r_top = 0.0;
  double r_low = 0.0;
  double c_qos = 0.0;
  double c_bnd = 0.0;
  bool done = false;

  bool operator==(const TraceRow&) const = default;
};

inline constexpr std::string_view kTraceHeader =
    "episode,step,uav_id,x,y,z,serving_bs,network_kind,sinr_dB,rate_bps,switched,r_top,r_low,c_qos,c_bnd,done";

void write_trace_header(std::ostream& os);
void write_trace_row(std::ostream& os, const TraceRow& row);
void write_trace(std::ostream& os, std::span<const TraceRow> rows);
// Throws FormatError on a header other than kTraceHeader or a malformed row.
std::vector<TraceRow> read_trace(std::istream& is);

struct MetricSummary {
  double avg_link_rate_bps = 0.0;
  double switch_count = 0.0;  // integral per episode, a mean in fleet aggregates
  double qos_satisfaction_ratio = 0.0;
  double flight_time_s = 0.0;
  int steps = 0;

  bool operator==(const MetricSummary&) const = default;
};

// Rows of one (episode, uav) pair in step order. Throws DomainError when empty.
MetricSummary compute_metrics(std::span<const TraceRow> rows, double r_req_bps, double dt_s);
// Mean of each field over episodes (steps summed).
MetricSummary aggregate(std::span<const MetricSummary> episodes);
// Splits a trace into (episode, uav) groups, in first-appearance order.
std::vector<std::vector<TraceRow>> group_episodes(std::span<const TraceRow> rows);

inline constexpr std::string_view kSummarySchema = "sagin.summary.v1";
// One JSON object per line. `episode` / `uav` < 0 mark fleet aggregates.
std::string summary_json(const MetricSummary& m, std::string_view policy, int episode, int uav);
MetricSummary summary_from_json(const std::string& line);

inline constexpr std::string_view kTrainLogHeader =
    "episode,top_return,low_return,ddqn_loss,critic1_loss,critic2_loss,actor_loss,alpha,lambda_qos,lambda_bnd,"
    "epsilon,mean_rate_bps,qos_ratio,switches,steps";

struct EpisodeLogRow {
  int episode = 0;
  double top_return = 0.0;  // UAV-averaged
  double low_return = 0.0;
  double ddqn_loss = 0.0;  // mean over the episode's updates, 0 if none
  double critic1_loss = 0.0;
  double critic2_loss = 0.0;
  double actor_loss = 0.0;
  double alpha = 0.0;
  double lambda_qos = 0.0;
  double lambda_bnd = 0.0;
  double epsilon = 0.0;
  double mean_rate_bps = 0.0;
  double qos_ratio = 0.0;
  double switches = 0.0;
  double steps = 0.0;

  bool operator==(const EpisodeLogRow&) const = default;
};

void write_train_log_header(std::ostream& os);
void write_train_log_row(std::ostream& os, const EpisodeLogRow& row);
std::vector<EpisodeLogRow> read_train_log(std::istream& is);

inline constexpr std::string_view kCompareHeader = "policy,metric,value";

struct RateBounds {
  double r_min_bps = 0.0;
  double r_max_bps = 0.0;
};

// Linear-interpolated percentile, q in [0, 100]. Throws DomainError on empty input.
double percentile(std::vector<double> values, double q);

// Per-step serving rates under uniformly random directions and max-RSRP association.
std::vector<double> random_policy_rates(const World& world, const EnvConfig& cfg, int n_episodes, std::uint64_t seed);
// 1st / 99th percentile of random_policy_rates.
RateBounds calibrate_rate_bounds(const World& world, const EnvConfig& cfg, int n_episodes, std::uint64_t seed);

}  // namespace sagin
