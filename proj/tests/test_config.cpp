#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "v2g/config.hpp"

using namespace v2g;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int sim(const std::string& args) {
  const std::string cmd = std::string(V2G_SIM_PATH) + " " + args + " > /dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

}  // namespace

TEST(Config, Defaults) {
  const RunConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_DOUBLE_EQ(c.env.transformer_limit_kw(), 3200.0);
  EXPECT_EQ(c.env.horizon.start_hour, 15);
  EXPECT_EQ(c.env.horizon.num_slots, 20);
  EXPECT_EQ(c.fleet_size, 509);
  EXPECT_DOUBLE_EQ(c.year_initial_soh, 97.46);
  EXPECT_EQ(c.year_days, 365);
  EXPECT_DOUBLE_EQ(c.ev.departure_band.min, 0.8);
  EXPECT_DOUBLE_EQ(c.ev.departure_band.max, 0.9);
  EXPECT_EQ(c.reward.sign_mode, env::SignMode::corrected);
}

TEST(Config, JsonRoundTrip) {
  RunConfig a;
  a.seed = 77;
  a.fleet_size = 12;
  a.reward.sign_mode = env::SignMode::paper_literal;
  a.ppo.epochs = 3;
  RunConfig b;
  apply_json(to_json(a), b);
  EXPECT_EQ(to_json(b).dump(), to_json(a).dump());
}

TEST(Config, UnknownKeysRejected) {
  RunConfig c;
  json j = to_json(c);
  j["env"]["transformer_kvaa"] = 1;
  EXPECT_THROW(apply_json(j, c), ConfigError);
  j = to_json(c);
  j["extra"] = true;
  EXPECT_THROW(apply_json(j, c), ConfigError);
}

TEST(Config, PartialFileKeepsDefaults) {
  const auto dir = scratch("v2g_cfg_partial");
  csv::write_text(dir / "c.json", R"({"seed": 5, "fleet": {"size": 30}})");
  const auto c = load_config(dir / "c.json");
  EXPECT_EQ(c.seed, 5u);
  EXPECT_EQ(c.fleet_size, 30);
  EXPECT_EQ(c.env.horizon.num_slots, 20);
  fs::remove_all(dir);
}

TEST(Config, BadInput) {
  const auto dir = scratch("v2g_cfg_bad");
  EXPECT_THROW(load_config(dir / "none.json"), MissingFileError);
  csv::write_text(dir / "broken.json", "{ not json");
  EXPECT_THROW(load_config(dir / "broken.json"), ConfigError);
  csv::write_text(dir / "mode.json", R"({"reward": {"sign_mode": "sideways"}})");
  EXPECT_THROW(load_config(dir / "mode.json"), ConfigError);
  RunConfig c;
  c.ppo.episode_length = 19;
  EXPECT_THROW(c.validate(), ConfigError);
  fs::remove_all(dir);
}

TEST(Config, EnvironmentVariableFallback) {
  const auto dir = scratch("v2g_cfg_env");
  csv::write_text(dir / "c.json", R"({"seed": 31})");
  setenv("V2G_SIM_CONFIG", (dir / "c.json").c_str(), 1);
  EXPECT_EQ(resolve_config(std::nullopt).seed, 31u);
  csv::write_text(dir / "d.json", R"({"seed": 32})");
  EXPECT_EQ(resolve_config((dir / "d.json").string()).seed, 32u);
  unsetenv("V2G_SIM_CONFIG");
  EXPECT_EQ(resolve_config(std::nullopt).seed, RunConfig{}.seed);
  fs::remove_all(dir);
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("v2g_cli_codes");
  EXPECT_EQ(sim("gen-profiles --out " + (dir / "g").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "g" / "profiles.csv"));
  EXPECT_EQ(sim("train --config " + (dir / "missing.json").string()), exit_code(ErrorKind::missing_file));
  csv::write_text(dir / "bad.json", R"({"bogus": 1})");
  EXPECT_EQ(sim("train --config " + (dir / "bad.json").string()), exit_code(ErrorKind::config));
  EXPECT_EQ(sim("evaluate --out " + (dir / "e").string()), exit_code(ErrorKind::config));
  EXPECT_EQ(sim("evaluate --checkpoint " + (dir / "nope.json").string() + " --out " +
                (dir / "e").string()),
            exit_code(ErrorKind::missing_file));
  EXPECT_EQ(sim("report " + (dir / "empty").string()), exit_code(ErrorKind::missing_file));
  EXPECT_NE(sim("train --sign-mode sideways"), 0);
  EXPECT_NE(sim(""), 0);
  fs::remove_all(dir);
}

TEST(Cli, TrainIsDeterministic) {
  const auto dir = scratch("v2g_cli_det");
  const std::string common = " --episodes 10 --fleet-size 5 --seed 1 --out ";
  ASSERT_EQ(sim("train" + common + (dir / "a").string()), 0);
  ASSERT_EQ(sim("train" + common + (dir / "b").string()), 0);
  for (const auto* f : {"checkpoint.json", "curve.csv"})
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  fs::remove_all(dir);
}

TEST(Cli, BaselineScheduleAndAllocation) {
  const auto dir = scratch("v2g_cli_alloc");
  const auto ev = (dir / "ev").string();
  ASSERT_EQ(sim("evaluate --baseline bl3 --fleet-size 15 --out " + ev), 0);
  const auto sched = csv::read(dir / "ev" / "schedule.csv");
  EXPECT_EQ(sched.rows.size(), 20u);
  ASSERT_EQ(sim("allocate --fleet-size 15 --schedule " + ev + "/schedule.csv --out " +
                (dir / "al").string()),
            0);
  const auto trace = csv::read(dir / "al" / "trace.csv");
  EXPECT_GT(trace.rows.size(), 0u);
  fs::remove_all(dir);
}
