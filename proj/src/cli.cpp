#include "sagin/cli.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "sagin/trainer.hpp"

namespace sagin {

namespace {

namespace fs = std::filesystem;

struct ScenarioArgs {
  std::string config_path;
  std::string preset = "default";
};

void add_scenario_args(CLI::App* app, ScenarioArgs& a) {
  app->add_option("--config", a.config_path, "Scenario config JSON");
  app->add_option("--preset", a.preset, "Built-in scenario when no --config is given")
      ->check(CLI::IsMember({"default", "scaled"}));
}

Config resolve_config(const ScenarioArgs& a) {
  if (!a.config_path.empty()) return load_config(a.config_path);
  return a.preset == "scaled" ? scaled_config() : default_config();
}

std::string output_dir(const std::string& flag) {
  if (const char* env = std::getenv("SAGIN_OUT_DIR"); env && *env) return env;
  return flag;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << text;
}

void print_summaries(std::ostream& out, const EvalResult& res, const std::string& policy) {
  // Episode / uav ids follow the trace grouping order.
  const auto groups = group_episodes(res.trace);
  for (std::size_t i = 0; i < res.episodes.size(); ++i)
    out << summary_json(res.episodes[i], policy, groups[i].front().episode, groups[i].front().uav_id) << '\n';
  out << summary_json(res.fleet, policy, -1, -1) << '\n';
}

void emit_compare_rows(std::ostream& out, const std::string& policy, const MetricSummary& m) {
  out << policy << ",avg_link_rate_bps," << m.avg_link_rate_bps << '\n';
  out << policy << ",switch_count," << m.switch_count << '\n';
  out << policy << ",qos_satisfaction_ratio," << m.qos_satisfaction_ratio << '\n';
  out << policy << ",flight_time_s," << m.flight_time_s << '\n';
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"UAV association and trajectory testbed for space-air-ground networks", "sagin"};
  app.require_subcommand(1);

  // calibrate
  ScenarioArgs cal_scn;
  int cal_episodes = 20;
  std::uint64_t cal_seed = 1;
  std::string cal_out;
  auto* cal = app.add_subcommand("calibrate", "Estimate rate normalisation bounds and write them to a config");
  add_scenario_args(cal, cal_scn);
  cal->add_option("--episodes", cal_episodes, "Calibration episodes")->check(CLI::PositiveNumber);
  cal->add_option("--seed", cal_seed, "Calibration seed");
  cal->add_option("--out", cal_out, "Output config path (defaults to --config)");

  // train
  ScenarioArgs tr_scn;
  std::string tr_policy = "hdrl", tr_out, tr_resume;
  std::optional<std::uint64_t> tr_seed;
  std::optional<int> tr_episodes, tr_uavs, tr_eval_every;
  bool tr_trace = false;
  auto* tr = app.add_subcommand("train", "Train a policy and write a checkpoint plus training log");
  add_scenario_args(tr, tr_scn);
  tr->add_option("--policy", tr_policy, "Policy to train");
  tr->add_option("--seed", tr_seed, "Training seed");
  tr->add_option("--episodes", tr_episodes, "Episode budget")->check(CLI::PositiveNumber);
  tr->add_option("--uavs", tr_uavs, "UAVs per episode")->check(CLI::PositiveNumber);
  tr->add_option("--out", tr_out, "Output directory (SAGIN_OUT_DIR overrides)");
  tr->add_option("--resume", tr_resume, "Continue from this checkpoint");
  tr->add_flag("--trace", tr_trace, "Also write the per-step training trace");
  tr->add_option("--eval-every", tr_eval_every, "Greedy evaluation every N episodes into eval_log.jsonl")
      ->check(CLI::NonNegativeNumber);

  // eval
  std::string ev_ckpt, ev_policy, ev_trace;
  ScenarioArgs ev_scn;
  int ev_episodes = 1;
  std::uint64_t ev_seed = 1;
  std::optional<int> ev_uavs;
  auto* ev = app.add_subcommand("eval", "Greedy evaluation; prints one summary record per line");
  ev->add_option("--checkpoint", ev_ckpt, "Trained checkpoint");
  add_scenario_args(ev, ev_scn);
  ev->add_option("--policy", ev_policy, "Policy (defaults to the checkpoint's)");
  ev->add_option("--episodes", ev_episodes, "Evaluation episodes")->check(CLI::PositiveNumber);
  ev->add_option("--seed", ev_seed, "Evaluation seed");
  ev->add_option("--uavs", ev_uavs, "UAVs per episode")->check(CLI::PositiveNumber);
  ev->add_option("--trace", ev_trace, "Write the evaluation trace here");

  // compare
  ScenarioArgs cmp_scn;
  std::vector<std::string> cmp_policies;
  std::uint64_t cmp_seed = 1;
  std::optional<int> cmp_train_episodes;
  int cmp_episodes = 5;
  std::string cmp_out;
  auto* cmp = app.add_subcommand("compare", "Train and evaluate several policies on shared seeds");
  add_scenario_args(cmp, cmp_scn);
  cmp->add_option("--policies", cmp_policies, "Comma-separated policies (default: all)")->delimiter(',');
  cmp->add_option("--seed", cmp_seed, "Seed shared by training and evaluation");
  cmp->add_option("--train-episodes", cmp_train_episodes, "Training budget per policy")->check(CLI::PositiveNumber);
  cmp->add_option("--episodes", cmp_episodes, "Evaluation episodes")->check(CLI::PositiveNumber);
  cmp->add_option("--out", cmp_out, "Directory for compare.csv (SAGIN_OUT_DIR overrides)");

  // export-trace
  std::string ex_ckpt, ex_policy, ex_out;
  ScenarioArgs ex_scn;
  int ex_episodes = 1;
  std::uint64_t ex_seed = 1;
  auto* ex = app.add_subcommand("export-trace", "Dump per-step rows of a greedy rollout as CSV");
  ex->add_option("--checkpoint", ex_ckpt, "Trained checkpoint");
  add_scenario_args(ex, ex_scn);
  ex->add_option("--policy", ex_policy, "Policy (defaults to the checkpoint's)");
  ex->add_option("--episodes", ex_episodes, "Episodes")->check(CLI::PositiveNumber);
  ex->add_option("--seed", ex_seed, "Seed");
  ex->add_option("--out", ex_out, "Output CSV (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "error: " << e.what() << "\n" << app.help();
    return 2;
  }

  // Loads either a checkpoint-backed or an untrained policy for eval / export.
  auto rollout_source = [](const std::string& ckpt, const ScenarioArgs& scn, const std::string& policy,
                           std::optional<int> uavs) {
    struct Source {
      Config cfg;
      std::shared_ptr<Trainer> trainer;
      std::shared_ptr<const World> world;
      Agents agents;
      PolicySpec spec;
    } s;
    if (!ckpt.empty()) {
      s.trainer = std::make_shared<Trainer>(Trainer::load_checkpoint(ckpt));
      s.cfg = s.trainer->config();
      s.agents = s.trainer->agents();
      s.spec = policy.empty() ? s.trainer->policy() : policy_spec(policy);
    } else {
      s.cfg = resolve_config(scn);
      s.spec = policy_spec(policy.empty() ? "sl" : policy);
      if (s.spec.trainable()) throw ConfigError("policy '" + s.spec.name + "' needs --checkpoint");
    }
    if (uavs) s.cfg.train.uav_count = *uavs;
    s.world = std::make_shared<const World>(World::deploy(s.cfg.scenario, s.cfg.channel));
    return s;
  };

  try {
    if (*cal) {
      Config cfg = resolve_config(cal_scn);
      const World world = World::deploy(cfg.scenario, cfg.channel);
      const RateBounds b = calibrate_rate_bounds(world, cfg.env, cal_episodes, cal_seed);
      cfg.env.r_min_bps = b.r_min_bps;
      cfg.env.r_max_bps = b.r_max_bps;
      const std::string dest = cal_out.empty() ? cal_scn.config_path : cal_out;
      if (dest.empty()) {
        out << to_json(cfg) << '\n';
      } else {
        save_config(cfg, dest);
        out << "r_min_bps=" << b.r_min_bps << " r_max_bps=" << b.r_max_bps << " written to " << dest << '\n';
      }
      return 0;
    }

    if (*tr) {
      const std::string dir = output_dir(tr_out);
      if (dir.empty()) throw ConfigError("train needs --out or SAGIN_OUT_DIR");
      fs::create_directories(dir);
      std::optional<Trainer> trainer;
      if (!tr_resume.empty()) {
        trainer.emplace(Trainer::load_checkpoint(tr_resume));
      } else {
        Config cfg = resolve_config(tr_scn);
        if (tr_seed) cfg.train.seed = *tr_seed;
        if (tr_episodes) cfg.train.episodes = *tr_episodes;
        if (tr_uavs) cfg.train.uav_count = *tr_uavs;
        if (tr_eval_every) cfg.train.eval_every = *tr_eval_every;
        trainer.emplace(cfg, tr_policy);
      }
      const fs::path base(dir);
      save_config(trainer->config(), (base / "config.json").string());
      trainer->diagnostic_path = (base / "diagnostic.ckpt").string();
      trainer->checkpoint_path = (base / "ckpt").string();
      const bool fresh_log = tr_resume.empty();
      std::ofstream log(base / "train_log.csv", fresh_log ? std::ios::trunc : std::ios::app);
      if (fresh_log) write_train_log_header(log);
      std::ofstream trace;
      if (tr_trace) {
        trace.open(base / "train_trace.csv", fresh_log ? std::ios::trunc : std::ios::app);
        if (fresh_log) write_trace_header(trace);
      }
      TrainHooks hooks;
      const int total = trainer->config().train.episodes;
      hooks.on_episode = [&](const EpisodeLogRow& row) {
        write_train_log_row(log, row);
        log.flush();
        if (total >= 10 && (row.episode + 1) % (total / 10) == 0)
          out << "episode " << row.episode + 1 << "/" << total << " top_return=" << row.top_return
              << " low_return=" << row.low_return << " qos=" << row.qos_ratio << std::endl;
      };
      if (tr_trace) hooks.on_step = [&](const TraceRow& r) { write_trace_row(trace, r); };
      std::ofstream eval_log;
      if (trainer->config().train.eval_every > 0) {
        eval_log.open(base / "eval_log.jsonl", fresh_log ? std::ios::trunc : std::ios::app);
        hooks.on_eval = [&](int done, const EvalResult& res) {
          auto rec = nlohmann::json::parse(summary_json(res.fleet, trainer->policy().name, -1, -1));
          rec["trained_episodes"] = done;
          eval_log << rec.dump() << '\n';
          eval_log.flush();
        };
      }
      trainer->train(-1, hooks);
      trainer->save_checkpoint((base / "ckpt").string());
      out << "checkpoint written to " << (base / "ckpt").string() << '\n';
      return 0;
    }

    if (*ev) {
      auto src = rollout_source(ev_ckpt, ev_scn, ev_policy, ev_uavs);
      const EvalResult res = evaluate(src.agents, *src.world, src.cfg, src.spec, ev_episodes, ev_seed);
      print_summaries(out, res, src.spec.name);
      if (!ev_trace.empty()) {
        std::ofstream f(ev_trace, std::ios::trunc);
        write_trace(f, res.trace);
      }
      return 0;
    }

    if (*cmp) {
      Config cfg = resolve_config(cmp_scn);
      cfg.train.seed = cmp_seed;
      if (cmp_train_episodes) cfg.train.episodes = *cmp_train_episodes;
      if (cmp_policies.empty()) cmp_policies = policy_names();
      std::ostringstream table;
      table << kCompareHeader << '\n';
      const World world = World::deploy(cfg.scenario, cfg.channel);
      for (const auto& name : cmp_policies) {
        const PolicySpec spec = policy_spec(name);
        Agents agents;
        if (spec.trainable()) {
          Trainer t(cfg, name);
          t.train();
          agents = t.agents();
        }
        const EvalResult res = evaluate(agents, world, cfg, spec, cmp_episodes, cmp_seed);
        emit_compare_rows(table, name, res.fleet);
      }
      out << table.str();
      const std::string dir = output_dir(cmp_out);
      if (!dir.empty()) {
        fs::create_directories(dir);
        write_file(fs::path(dir) / "compare.csv", table.str());
      }
      return 0;
    }

    if (*ex) {
      auto src = rollout_source(ex_ckpt, ex_scn, ex_policy, std::nullopt);
      const EvalResult res = evaluate(src.agents, *src.world, src.cfg, src.spec, ex_episodes, ex_seed);
      if (ex_out.empty()) {
        write_trace(out, res.trace);
      } else {
        std::ofstream f(ex_out, std::ios::trunc);
        if (!f) throw ConfigError("cannot write " + ex_out);
        write_trace(f, res.trace);
      }
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 64 << 20);
  mallopt(M_TRIM_THRESHOLD, 128 << 20);
#endif
}

}  // namespace sagin
