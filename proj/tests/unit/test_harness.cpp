#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fhescale/data/movielens.hpp"
#include "fhescale/harness/commands.hpp"
#include "fhescale/harness/config.hpp"
#include "fhescale/harness/metrics_io.hpp"
#include "fhescale/harness/plots.hpp"
#include "fhescale/harness/training.hpp"

using namespace fhescale;
using namespace fhescale::harness;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const char* name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string config_error(const json& doc) {
  try {
    parse_config(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

CommonOptions common_for(const fs::path& out, std::uint64_t seed = 3) {
  CommonOptions c;
  c.seed = seed;
  c.out = out;
  return c;
}

}  // namespace

TEST_CASE("presets") {
  const auto d = preset_config("default");
  CHECK(d.episodes == 100);
  CHECK(d.env.steps_per_episode == 20);
  CHECK(d.env.soft_pod_threshold == 5);
  CHECK(d.env.max_pods() == 100);
  CHECK(d.env.cluster.cooldown_window_s == 30.0);
  CHECK_NOTHROW(d.validate());
  const auto g = preset_config("diagnostic");
  CHECK(g.env.soft_pod_threshold == 4);
  CHECK(g.env.cluster.failure_probability == 0.0);
  CHECK(g.env.cluster.service_jitter_s == 0.0);
  CHECK(static_cast<long>(g.episodes) * g.env.steps_per_episode <= 10000);
  CHECK_THROWS_AS(preset_config("nope"), ConfigError);
}

TEST_CASE("config round trip and overlay") {
  auto c = preset_config("diagnostic");
  c.seed = 77;
  c.layout.hidden = {16, 8};
  c.env.cluster.failure_probability = 0.25;
  const auto back = parse_config(to_json(c));
  CHECK(to_json(back) == to_json(c));

  const auto o = parse_config(json{{"preset", "diagnostic"}, {"ppo", {{"epochs", 3}}}});
  CHECK(o.ppo.epochs == 3);
  CHECK(o.env.stress_interval == 1);
}

TEST_CASE("config errors name the field") {
  CHECK(config_error(json{{"sim", {{"failure_probability", 1.5}}}}).rfind("sim.failure_probability:", 0) == 0);
  CHECK(config_error(json{{"env", {{"stress_interval", 0}}}}).rfind("env.stress_interval:", 0) == 0);
  CHECK(config_error(json{{"ppo", {{"clip_epsilon", 2.0}}}}).rfind("ppo.clip_epsilon:", 0) == 0);
  CHECK(config_error(json{{"ppo", {{"epochs", 2.5}}}}) == "ppo.epochs: expected an integer");
  CHECK(config_error(json{{"sim", {{"bogus", 1}}}}) == "sim.bogus: unknown field");
  CHECK(config_error(json{{"typo", 1}}) == "typo: unknown field");
  CHECK(config_error(json{{"seed", -1}}) == "seed: expected a non-negative integer");
  CHECK(config_error(json{{"env", 3}}) == "env: expected an object");
  CHECK(config_error(json{{"env", {{"soft_pod_threshold", 500}}}}).rfind("env.soft_pod_threshold:", 0) == 0);
  CHECK(config_error(json{{"ppo", {{"hidden", json::array()}}}}).rfind("ppo.hidden:", 0) == 0);
}

TEST_CASE("load_config reports unreadable and malformed files") {
  TempDir tmp("fhescale_cfg_test");
  CHECK_THROWS_AS(load_config(tmp.path / "missing.json"), ConfigError);
  std::ofstream(tmp.path / "bad.json") << "{ not json";
  CHECK_THROWS_AS(load_config(tmp.path / "bad.json"), ConfigError);
}

TEST_CASE("csv headers and episode round trip") {
  std::ostringstream s;
  write_step_csv({}, s);
  CHECK(s.str() ==
        "episode,step,action,response_time_s,pod_count,replica_target,reward_base,penalty_stress,penalty_resource,"
        "heal_penalty,reward_total\n");
  std::ostringstream e;
  const std::vector<EpisodeRow> rows{{0, 20, -1.5, 0.9, 3.25, 3.0, 2}, {1, 20, -2.0, 1.1, 4.0, 3.5, 0}};
  write_episode_csv(rows, e);
  CHECK(e.str().rfind("episode,steps,mean_reward,mean_latency_s,mean_replicas,mean_pods,stress_failures\n", 0) == 0);
  std::istringstream in(e.str());
  const auto back = read_episode_csv(in);
  REQUIRE(back.size() == 2);
  CHECK(back[0].mean_replicas == 3.25);
  CHECK(back[1].stress_failures == 0);

  std::istringstream bad("episode,steps,mean_reward,mean_latency_s,mean_replicas,mean_pods,stress_failures\n1,2,x,4,5,6,7\n");
  CHECK_THROWS_WITH_AS(read_episode_csv(bad), "line 2: bad field 'x'", CsvError);
}

TEST_CASE("episode summary means") {
  std::vector<StepRow> steps(4);
  for (int i = 0; i < 4; ++i) {
    steps[static_cast<std::size_t>(i)].episode = i / 2;
    steps[static_cast<std::size_t>(i)].reward_total = -i;
    steps[static_cast<std::size_t>(i)].replica_target = i + 1;
    steps[static_cast<std::size_t>(i)].stress_failed = i == 3;
  }
  const auto eps = summarize(steps);
  REQUIRE(eps.size() == 2);
  CHECK(eps[0].mean_reward == -0.5);
  CHECK(eps[1].mean_replicas == 3.5);
  CHECK(eps[1].stress_failures == 1);
  CHECK(eps[1].steps == 2);
}

TEST_CASE("svg rendering") {
  const std::vector<EpisodeRow> eps{{0, 20, -2.0, 1.0, 2.6, 2.5, 1}, {1, 20, -1.5, 1.2, 3.4, 3.0, 0},
                                    {2, 20, -1.7, 1.1, 3.2, 3.1, 0}};
  const auto sel = replica_selection_chart(eps);
  REQUIRE(sel.series.size() == 2);
  CHECK(sel.series[0].x == std::vector<double>{3.0});  // all round to 3
  CHECK(sel.series[0].y[0] == doctest::Approx((-2.0 - 1.5 - 1.7) / 3));
  const auto svg = render_svg(reward_chart(eps));
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("Reward Per Episode") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(render_svg(Chart{"empty & <odd>", "x", "y", {}}).find("empty &amp; &lt;odd&gt;") != std::string::npos);
}

TEST_CASE("data command: deterministic synthetic artifact, parse errors, real layout") {
  TempDir a("fhescale_cmd_data_a"), b("fhescale_cmd_data_b");
  std::ostringstream out, err;
  DataOptions opts;
  opts.users = 200;
  CHECK(cmd_data(common_for(a.path, 7), opts, out, err) == kExitOk);
  CHECK(cmd_data(common_for(b.path, 7), opts, out, err) == kExitOk);
  CHECK(slurp(a.path / "dataset.txt") == slurp(b.path / "dataset.txt"));
  CHECK(out.str().find("films (50):") != std::string::npos);

  std::ofstream(a.path / "bad.tsv") << "1\t2\t4\t100\n1\t3\tfive\t101\n";
  DataOptions bad;
  bad.input = a.path / "bad.tsv";
  std::ostringstream err2;
  CHECK(cmd_data(common_for(a.path), bad, out, err2) != kExitOk);
  CHECK(err2.str().find("line 2") != std::string::npos);

  {
    std::ofstream f(a.path / "u.data");
    data::write_ratings(data::synth_ratings(5, 150), f);
  }
  DataOptions real;
  real.input = a.path / "u.data";
  std::ostringstream out3;
  CHECK(cmd_data(common_for(a.path), real, out3, err) == kExitOk);
  std::ifstream ds(a.path / "dataset.txt");
  CHECK(data::read_dataset(ds).films.size() == 50);
}

TEST_CASE("fhe-demo: exact equivalence, bit-width agreement, noise overflow") {
  TempDir tmp("fhescale_cmd_fhe");
  auto agreement = [&](int bits) {
    std::ostringstream out, err;
    FheDemoOptions o;
    o.bits = bits;
    o.inferences = 300;
    const int code = cmd_fhe_demo(common_for(tmp.path, 11), o, out, err);
    CHECK(code == kExitOk);
    CHECK(out.str().find("encrypted == quantized-plaintext: 300/300") != std::string::npos);
    const auto pos = out.str().find("float vs quantized agreement: ");
    REQUIRE(pos != std::string::npos);
    return std::stoi(out.str().substr(pos + 30));
  };
  CHECK(agreement(8) >= agreement(2));

  std::ostringstream out, err;
  FheDemoOptions deep;
  deep.activation = true;
  deep.no_bootstrap = true;
  deep.inferences = 3;
  CHECK(cmd_fhe_demo(common_for(tmp.path), deep, out, err) == kExitFailure);
  CHECK(err.str().find("noise budget") != std::string::npos);
}

TEST_CASE("train, eval and plot commands") {
  TempDir a("fhescale_cmd_train_a"), b("fhescale_cmd_train_b");
  std::ostringstream out, err;
  REQUIRE(cmd_train(common_for(a.path), out, err) == kExitOk);
  REQUIRE(cmd_train(common_for(b.path), out, err) == kExitOk);
  for (const char* f : {"step_metrics.csv", "episode_metrics.csv", "policy.bin", "reward_per_episode.svg"})
    CHECK(slurp(a.path / f) == slurp(b.path / f));
  const auto episodes = read_episode_csv(a.path / "episode_metrics.csv");
  CHECK(episodes.size() == 100);
  for (const char* f : {"replica_selection.svg", "reward_per_episode.svg", "latency_per_episode.svg",
                        "replicas_per_episode.svg", "config.json"})
    CHECK(fs::exists(a.path / f));

  // The written config reproduces the run.
  CommonOptions from_file;
  from_file.config = a.path / "config.json";
  from_file.out = b.path / "again";
  REQUIRE(cmd_train(from_file, out, err) == kExitOk);
  CHECK(slurp(a.path / "episode_metrics.csv") == slurp(b.path / "again" / "episode_metrics.csv"));

  EvalOptions e;
  e.episodes = 2;
  std::ostringstream s1, s2;
  CHECK(cmd_eval(common_for(a.path), e, s1, err) == kExitOk);
  CHECK(cmd_eval(common_for(a.path), e, s2, err) == kExitOk);
  CHECK(s1.str() == s2.str());
  CHECK(s1.str().find("mean") != std::string::npos);

  e.episodes = 0;
  std::ostringstream empty;
  CHECK(cmd_eval(common_for(a.path), e, empty, err) == kExitOk);
  CHECK(empty.str().find("mean ") == std::string::npos);

  // Layout mismatch between checkpoint and config.
  std::ofstream(a.path / "small.json") << R"({"ppo": {"hidden": [8]}})";
  CommonOptions mismatch = common_for(a.path);
  mismatch.config = a.path / "small.json";
  std::ostringstream merr;
  CHECK(cmd_eval(mismatch, EvalOptions{}, out, merr) == kExitFailure);
  CHECK(merr.str().find("layout") != std::string::npos);

  PlotOptions p;
  p.input_dir = a.path;
  const fs::path figs = a.path / "figs";
  std::ostringstream pout;
  CHECK(cmd_plot(common_for(figs), p, pout, err) == kExitOk);
  CHECK(slurp(figs / "replicas_per_episode.svg") == slurp(a.path / "replicas_per_episode.svg"));
}

TEST_CASE("invalid config exits with usage code and field path") {
  TempDir tmp("fhescale_cmd_badcfg");
  std::ofstream(tmp.path / "c.json") << R"({"env": {"steps_per_episode": 0}})";
  CommonOptions c;
  c.config = tmp.path / "c.json";
  c.out = tmp.path;
  std::ostringstream out, err;
  CHECK(cmd_train(c, out, err) == kExitUsage);
  CHECK(err.str().find("env.steps_per_episode") != std::string::npos);
}
