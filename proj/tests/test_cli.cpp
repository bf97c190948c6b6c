#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sagin/cli.hpp"
#include "sagin/trainer.hpp"
#include "support.hpp"

using namespace sagin;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "sagin");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> v;
  std::istringstream is(text);
  for (std::string l; std::getline(is, l);)
    if (!l.empty()) v.push_back(l);
  return v;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Fresh scratch directory holding a small scenario config.
struct Scratch {
  fs::path dir;
  std::string config;

  explicit Scratch(const std::string& name) {
    dir = fs::temp_directory_path() / ("sagin_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    config = (dir / "scenario.json").string();
    Config c = sagin::test::small_config(2, 20);
    c.train.seed = 5;
    save_config(c, config);
  }
  ~Scratch() { fs::remove_all(dir); }
  std::string path(const std::string& leaf) const { return (dir / leaf).string(); }
};

}  // namespace

TEST_CASE("cli train then eval is deterministic") {
  Scratch s("train");
  const Run tr = cli({"train", "--config", s.config, "--out", s.path("run")});
  REQUIRE_MESSAGE(tr.code == 0, tr.err);
  for (const char* f : {"ckpt", "config.json", "train_log.csv"}) CHECK(fs::exists(s.dir / "run" / f));
  std::ifstream log(s.dir / "run" / "train_log.csv");
  CHECK(read_train_log(log).size() == 2);

  const std::vector<std::string> args{"eval", "--checkpoint", s.path("run/ckpt"), "--episodes", "3", "--seed", "7"};
  const Run a = cli(args);
  const Run b = cli(args);
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  const auto rows = lines(a.out);
  REQUIRE(rows.size() == 4);  // three episodes plus the fleet record
  std::vector<MetricSummary> eps;
  for (std::size_t i = 0; i < 3; ++i) {
    eps.push_back(summary_from_json(rows[i]));
    CHECK(nlohmann::json::parse(rows[i]).at("policy") == "hdrl");
  }
  CHECK(summary_from_json(rows[3]) == aggregate(eps));
  CHECK(nlohmann::json::parse(rows[3]).at("episode") == -1);

  CHECK(cli({"eval", "--checkpoint", s.path("run/ckpt"), "--episodes", "3", "--seed", "8"}).out != a.out);
}

TEST_CASE("cli training is seed-deterministic and resumable") {
  Scratch s("resume");
  REQUIRE(cli({"train", "--config", s.config, "--out", s.path("a")}).code == 0);
  REQUIRE(cli({"train", "--config", s.config, "--out", s.path("b")}).code == 0);
  CHECK(slurp(s.dir / "a" / "ckpt") == slurp(s.dir / "b" / "ckpt"));
  CHECK(slurp(s.dir / "a" / "train_log.csv") == slurp(s.dir / "b" / "train_log.csv"));
  REQUIRE(cli({"train", "--config", s.config, "--out", s.path("c"), "--seed", "6"}).code == 0);
  CHECK(slurp(s.dir / "a" / "ckpt") != slurp(s.dir / "c" / "ckpt"));

  // A run cut after one episode and resumed ends where the straight run ends.
  Config c = load_config(s.config);
  c.train.checkpoint_every = 1;
  Trainer half(c, "hdrl");
  half.train(1);
  half.save_checkpoint(s.path("half.ckpt"));
  REQUIRE(cli({"train", "--resume", s.path("half.ckpt"), "--out", s.path("d")}).code == 0);
  Trainer full(c, "hdrl");
  full.train();
  CHECK(slurp(s.dir / "d" / "ckpt") == full.checkpoint_bytes());
}

TEST_CASE("cli compare emits one row per policy and metric") {
  Scratch s("compare");
  const Run r = cli({"compare", "--config", s.config, "--policies", "sl,hdrl", "--train-episodes", "1", "--episodes",
                     "2", "--out", s.path("cmp")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto rows = lines(r.out);
  REQUIRE(rows.size() == 9);
  CHECK(rows[0] == kCompareHeader);
  for (const char* policy : {"sl", "hdrl"})
    for (const char* metric : {"avg_link_rate_bps", "switch_count", "qos_satisfaction_ratio", "flight_time_s"}) {
      const std::string prefix = std::string(policy) + "," + metric + ",";
      CHECK(std::count_if(rows.begin(), rows.end(), [&](const std::string& l) { return l.rfind(prefix, 0) == 0; }) ==
            1);
    }
  CHECK(slurp(s.dir / "cmp" / "compare.csv") == r.out);
}

TEST_CASE("cli export-trace writes one row per step") {
  Scratch s("trace");
  const Run ex = cli({"export-trace", "--config", s.config, "--policy", "sl", "--episodes", "2", "--seed", "3", "--out",
                      s.path("trace.csv")});
  REQUIRE_MESSAGE(ex.code == 0, ex.err);
  const std::string text = slurp(s.dir / "trace.csv");
  const auto all = lines(text);
  std::istringstream is(text);
  const auto rows = read_trace(is);

  const Run ev = cli({"eval", "--config", s.config, "--policy", "sl", "--episodes", "2", "--seed", "3"});
  REQUIRE(ev.code == 0);
  const MetricSummary fleet = summary_from_json(lines(ev.out).back());
  CHECK(static_cast<int>(rows.size()) == fleet.steps);
  CHECK(all.size() == rows.size() + 1);

  // Same rows on stdout when no --out is given.
  const Run to_stdout = cli({"export-trace", "--config", s.config, "--policy", "sl", "--episodes", "2", "--seed", "3"});
  CHECK(to_stdout.out == text);
}

TEST_CASE("cli calibrate writes bounds into a config") {
  Scratch s("cal");
  const Run r = cli({"calibrate", "--config", s.config, "--episodes", "3", "--seed", "4", "--out", s.path("cal.json")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const Config base = load_config(s.config);
  const Config cal = load_config(s.path("cal.json"));
  const World world = World::deploy(base.scenario, base.channel);
  const RateBounds b = calibrate_rate_bounds(world, base.env, 3, 4);
  CHECK(cal.env.r_min_bps == b.r_min_bps);
  CHECK(cal.env.r_max_bps == b.r_max_bps);
}

TEST_CASE("cli errors and exit codes") {
  Scratch s("errors");
  CHECK(cli({}).code == 2);
  CHECK(cli({"fly"}).code == 2);
  CHECK(cli({"eval", "--bogus"}).code == 2);
  CHECK(cli({"train", "--config", s.config, "--episodes", "0", "--out", s.path("x")}).code == 2);
  CHECK(cli({"--help"}).code == 0);

  Run r = cli({"eval", "--config", s.config, "--policy", "nope"});
  CHECK(r.code == 1);
  CHECK(r.err.find("nope") != std::string::npos);
  CHECK(cli({"eval", "--config", s.config, "--policy", "hdrl"}).code == 1);  // needs a checkpoint
  CHECK(cli({"eval", "--config", s.path("missing.json")}).code == 1);

  std::ofstream(s.path("junk.ckpt")) << "not a checkpoint";
  r = cli({"eval", "--checkpoint", s.path("junk.ckpt")});
  CHECK(r.code == 1);
  CHECK(r.err.find("error:") == 0);
}

TEST_CASE("cli train writes a periodic evaluation log") {
  Scratch s("evallog");
  REQUIRE(cli({"train", "--config", s.config, "--out", s.path("run"), "--eval-every", "1"}).code == 0);
  const auto recs = lines(slurp(s.dir / "run" / "eval_log.jsonl"));
  REQUIRE(recs.size() == 2);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const auto j = nlohmann::json::parse(recs[i]);
    CHECK(j.at("trained_episodes") == static_cast<int>(i) + 1);
    CHECK(j.at("episode") == -1);
    CHECK(summary_from_json(recs[i]).steps > 0);
  }
  // No log without a cadence.
  REQUIRE(cli({"train", "--config", s.config, "--out", s.path("quiet")}).code == 0);
  CHECK_FALSE(fs::exists(s.dir / "quiet" / "eval_log.jsonl"));
}

TEST_CASE("SAGIN_OUT_DIR overrides --out") {
  Scratch s("envdir");
  ::setenv("SAGIN_OUT_DIR", s.path("from_env").c_str(), 1);
  const Run r = cli({"train", "--config", s.config, "--episodes", "1", "--out", s.path("from_flag")});
  ::unsetenv("SAGIN_OUT_DIR");
  REQUIRE(r.code == 0);
  CHECK(fs::exists(s.dir / "from_env" / "ckpt"));
  CHECK_FALSE(fs::exists(s.dir / "from_flag"));
}

TEST_CASE("the installed binary reports failures through its exit status") {
  const std::string bin = SAGIN_CLI_PATH;
  REQUIRE(fs::exists(bin));
  CHECK(std::system((bin + " --help > /dev/null").c_str()) == 0);
  const int status = std::system((bin + " eval --policy nope 2> /dev/null").c_str());
  REQUIRE(WIFEXITED(status));
  CHECK(WEXITSTATUS(status) == 1);
  const int usage = std::system((bin + " --bogus 2> /dev/null").c_str());
  REQUIRE(WIFEXITED(usage));
  CHECK(WEXITSTATUS(usage) == 2);
}
