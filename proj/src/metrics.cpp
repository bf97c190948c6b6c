#include "sagin/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <map>
#include <ostream>

#include <json.hpp>

namespace sagin {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_double(const std::string& s, std::size_t line_no) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size())
    throw FormatError("line " + std::to_string(line_no) + ": bad number '" + s + "'");
  return v;
}

int parse_int(const std::string& s, std::size_t line_no) {
  const double v = parse_double(s, line_no);
  if (v != std::floor(v)) throw FormatError("line " + std::to_string(line_no) + ": expected integer '" + s + "'");
  return static_cast<int>(v);
}

bool parse_bool(const std::string& s, std::size_t line_no) {
  if (s == "0") return false;
  if (s == "1") return true;
  throw FormatError("line " + std::to_string(line_no) + ": expected 0 or 1, got '" + s + "'");
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace

void write_trace_header(std::ostream& os) { os << kTraceHeader << '\n'; }

void write_trace_row(std::ostream& os, const TraceRow& r) {
  os << r.episode << ',' << r.step << ',' << r.uav_id << ',' << num(r.pos.x) << ',' << num(r.pos.y) << ','
     << num(r.pos.z) << ',' << r.serving_bs << ',' << to_string(r.kind) << ',' << num(r.sinr_db) << ','
     << num(r.rate_bps) << ',' << (r.switched ? 1 : 0) << ',' << num(r.r_top) << ',' << num(r.r_low) << ','
     << num(r.c_qos) << ',' << num(r.c_bnd) << ',' << (r.done ? 1 : 0) << '\n';
}

void write_trace(std::ostream& os, std::span<const TraceRow> rows) {
  write_trace_header(os);
  for (const auto& r : rows) write_trace_row(os, r);
}

std::vector<TraceRow> read_trace(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("trace: missing header");
  if (strip_cr(line) != kTraceHeader) throw FormatError("trace: unsupported header '" + strip_cr(line) + "'");
  std::vector<TraceRow> rows;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 16) throw FormatError("trace line " + std::to_string(line_no) + ": expected 16 fields");
    TraceRow r;
    r.episode = parse_int(f[0], line_no);
    r.step = parse_int(f[1], line_no);
    r.uav_id = parse_int(f[2], line_no);
    r.pos = {parse_double(f[3], line_no), parse_double(f[4], line_no), parse_double(f[5], line_no)};
    r.serving_bs = parse_int(f[6], line_no);
    try {
      r.kind = network_kind_from_string(f[7]);
    } catch (const std::exception&) {
      throw FormatError("trace line " + std::to_string(line_no) + ": unknown network kind '" + f[7] + "'");
    }
    r.sinr_db = parse_double(f[8], line_no);
    r.rate_bps = parse_double(f[9], line_no);
    r.switched = parse_bool(f[10], line_no);
    r.r_top = parse_double(f[11], line_no);
    r.r_low = parse_double(f[12], line_no);
    r.c_qos = parse_double(f[13], line_no);
    r.c_bnd = parse_double(f[14], line_no);
    r.done = parse_bool(f[15], line_no);
    rows.push_back(r);
  }
  return rows;
}

MetricSummary compute_metrics(std::span<const TraceRow> rows, double r_req_bps, double dt_s) {
  if (rows.empty()) throw DomainError("compute_metrics: empty episode log");
  MetricSummary m;
  int satisfied = 0;
  int switches = 0;
  double rate_sum = 0.0;
  for (const auto& r : rows) {
    rate_sum += r.rate_bps;
    if (r.rate_bps >= r_req_bps) ++satisfied;
    if (r.switched) ++switches;
  }
  m.steps = static_cast<int>(rows.size());
  m.avg_link_rate_bps = rate_sum / m.steps;
  m.switch_count = switches;
  m.qos_satisfaction_ratio = static_cast<double>(satisfied) / m.steps;
  m.flight_time_s = m.steps * dt_s;
  return m;
}

MetricSummary aggregate(std::span<const MetricSummary> episodes) {
  if (episodes.empty()) throw DomainError("aggregate: no episodes");
  MetricSummary a;
  for (const auto& e : episodes) {
    a.avg_link_rate_bps += e.avg_link_rate_bps;
    a.switch_count += e.switch_count;
    a.qos_satisfaction_ratio += e.qos_satisfaction_ratio;
    a.flight_time_s += e.flight_time_s;
    a.steps += e.steps;
  }
  const auto n = static_cast<double>(episodes.size());
  a.avg_link_rate_bps /= n;
  a.switch_count /= n;
  a.qos_satisfaction_ratio /= n;
  a.flight_time_s /= n;
  return a;
}

std::vector<std::vector<TraceRow>> group_episodes(std::span<const TraceRow> rows) {
  std::map<std::pair<int, int>, std::size_t> index;
  std::vector<std::vector<TraceRow>> groups;
  for (const auto& r : rows) {
    const auto key = std::make_pair(r.episode, r.uav_id);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, groups.size()).first;
      groups.emplace_back();
    }
    groups[it->second].push_back(r);
  }
  return groups;
}

std::string summary_json(const MetricSummary& m, std::string_view policy, int episode, int uav) {
  nlohmann::ordered_json j;
  j["schema"] = kSummarySchema;
  j["policy"] = policy;
  j["episode"] = episode;
  j["uav"] = uav;
  j["avg_link_rate_bps"] = m.avg_link_rate_bps;
  j["switch_count"] = m.switch_count;
  j["qos_satisfaction_ratio"] = m.qos_satisfaction_ratio;
  j["flight_time_s"] = m.flight_time_s;
  j["steps"] = m.steps;
  return j.dump();
}

MetricSummary summary_from_json(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("summary: ") + e.what());
  }
  if (!j.is_object() || j.value("schema", "") != kSummarySchema) throw FormatError("summary: unknown schema");
  try {
    MetricSummary m;
    m.avg_link_rate_bps = j.at("avg_link_rate_bps").get<double>();
    m.switch_count = j.at("switch_count").get<double>();
    m.qos_satisfaction_ratio = j.at("qos_satisfaction_ratio").get<double>();
    m.flight_time_s = j.at("flight_time_s").get<double>();
    m.steps = j.at("steps").get<int>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("summary: ") + e.what());
  }
}

void write_train_log_header(std::ostream& os) { os << kTrainLogHeader << '\n'; }

void write_train_log_row(std::ostream& os, const EpisodeLogRow& r) {
  os << r.episode;
  for (double v : {r.top_return, r.low_return, r.ddqn_loss, r.critic1_loss, r.critic2_loss, r.actor_loss, r.alpha,
                   r.lambda_qos, r.lambda_bnd, r.epsilon, r.mean_rate_bps, r.qos_ratio, r.switches, r.steps})
    os << ',' << num(v);
  os << '\n';
}

std::vector<EpisodeLogRow> read_train_log(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("training log: missing header");
  if (strip_cr(line) != kTrainLogHeader) throw FormatError("training log: unsupported header");
  std::vector<EpisodeLogRow> rows;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 15) throw FormatError("training log line " + std::to_string(line_no) + ": expected 15 fields");
    EpisodeLogRow r;
    r.episode = parse_int(f[0], line_no);
    double* fields[] = {&r.top_return, &r.low_return, &r.ddqn_loss,  &r.critic1_loss, &r.critic2_loss,
                        &r.actor_loss, &r.alpha,      &r.lambda_qos, &r.lambda_bnd,   &r.epsilon,
                        &r.mean_rate_bps, &r.qos_ratio, &r.switches, &r.steps};
    for (std::size_t i = 0; i < 14; ++i) *fields[i] = parse_double(f[i + 1], line_no);
    rows.push_back(r);
  }
  return rows;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw DomainError("percentile: no values");
  if (!(q >= 0.0 && q <= 100.0)) throw DomainError("percentile: q outside [0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<double> random_policy_rates(const World& world, const EnvConfig& cfg, int n_episodes,
                                        std::uint64_t seed) {
  if (n_episodes < 1) throw DomainError("calibration needs at least one episode");
  constexpr std::uint64_t kStream = 0xca1b;
  std::vector<double> rates;
  for (int e = 0; e < n_episodes; ++e) {
    const auto ep = static_cast<std::uint64_t>(e);
    Rng start_rng(derive_seed(seed, kStream, ep, 0));
    Rng dir_rng(derive_seed(seed, kStream, ep, 1));
    UavEnv env(world, cfg, Rng(derive_seed(seed, kStream, ep, 2)));
    env.reset(sample_start(world.box(), cfg, start_rng), cfg.goal);
    std::normal_distribution<double> n01(0.0, 1.0);
    while (!env.done()) {
      env.apply_association(argmax_rsrp(env.measurements()));
      Vec3 d;
      do {
        d = {n01(dir_rng), n01(dir_rng), n01(dir_rng)};
      } while (d.norm() < 1e-9);
      const auto out = env.apply_low_action(d.normalized());
      rates.push_back(out.info.rate_bps);
    }
  }
  return rates;
}

RateBounds calibrate_rate_bounds(const World& world, const EnvConfig& cfg, int n_episodes, std::uint64_t seed) {
  const auto rates = random_policy_rates(world, cfg, n_episodes, seed);
  RateBounds b{percentile(rates, 1.0), percentile(rates, 99.0)};
  if (!(b.r_max_bps > b.r_min_bps)) b.r_max_bps = std::nextafter(b.r_min_bps, INFINITY) + 1.0;
  return b;
}

}  // namespace sagin
