// v2g_sim: train, evaluate, allocate, simulate-year, report, gen-profiles.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "v2g/v2g.hpp"

namespace fs = std::filesystem;
using namespace v2g;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> workers;
  std::optional<long long> episodes;
  std::optional<int> fleet_size;
  std::optional<std::string> sign_mode;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON config (falls back to $V2G_SIM_CONFIG)");
  cmd->add_option("--seed", c.seed, "master seed");
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--workers", c.workers, "worker threads (1 = bit-exact)");
  cmd->add_option("--episodes", c.episodes, "training episodes");
  cmd->add_option("--fleet-size", c.fleet_size, "number of EVs");
  cmd->add_option("--sign-mode", c.sign_mode, "reward sign mode")
      ->check(CLI::IsMember({"paper_literal", "corrected"}));
}

RunConfig effective(const Common& o) {
  auto c = resolve_config(o.config.empty() ? std::nullopt : std::optional<std::string>(o.config));
  if (o.seed) c.seed = *o.seed;
  if (o.out) c.out_dir = *o.out;
  if (o.workers) c.workers = *o.workers;
  if (o.episodes) c.ppo.episodes = *o.episodes;
  if (o.fleet_size) c.fleet_size = *o.fleet_size;
  if (o.sign_mode) c.reward.sign_mode = parse_sign_mode(*o.sign_mode);
  c.validate();
  return c;
}

// Creates the run directory and writes the effective config into it.
fs::path open_run(const RunConfig& c) {
  const fs::path dir = c.out_dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  save_config(c, dir / "config.json");
  return dir;
}

json day_json(const DayResult& d) {
  return {{"reward", d.total_reward()},
          {"load_variance", d.load_variance()},
          {"charging_cost", d.charging_cost()},
          {"max_grid_load_kw", d.max_grid_load()},
          {"projected_slots", d.projected},
          {"grid_conflicts", d.conflicts}};
}

metrics::DayRunner pick_runner(const std::string& checkpoint, const std::string& baseline,
                               std::optional<ppo::Policy>& holder) {
  if (checkpoint.empty() == baseline.empty())
    throw ConfigError("give exactly one of --checkpoint or --baseline");
  if (!baseline.empty()) return report::baseline_runner(baselines::parse_baseline(baseline));
  if (!fs::exists(checkpoint)) throw MissingFileError("checkpoint not found: " + checkpoint);
  holder = ppo::load_policy(checkpoint);
  return report::policy_runner(*holder);
}

int cmd_train(const Common& o) {
  const auto c = effective(o);
  const auto dir = open_run(c);
  const auto e = make_environment(c);
  ppo::TrainOptions opt;
  opt.seed = c.seed;
  opt.workers = c.workers;
  opt.out_dir = dir;
  const auto res = ppo::train(e, c.ppo, opt);
  std::cout << "episodes " << res.curve.size() << ", best rollout reward " << res.best_reward
            << "\n";
  return 0;
}

int cmd_evaluate(const Common& o, const std::string& checkpoint, const std::string& baseline) {
  const auto c = effective(o);
  std::optional<ppo::Policy> policy;
  const auto run = pick_runner(checkpoint, baseline, policy);
  const auto dir = open_run(c);
  auto e = make_environment(c);
  const auto d = run(e, report::evaluation_day_seed(c));
  write_schedule(d, dir / "schedule.csv");
  csv::write_text(dir / "evaluation.json", day_json(d).dump(2) + "\n");
  std::cout << "reward " << d.total_reward() << ", LV " << d.load_variance() << "\n";
  return 0;
}

int cmd_allocate(const Common& o, const std::string& schedule) {
  const auto c = effective(o);
  if (!fs::exists(schedule)) throw MissingFileError("schedule not found: " + schedule);
  const auto power = read_schedule(schedule);
  auto e = make_environment(c);
  if (power.size() != static_cast<std::size_t>(c.env.horizon.num_slots))
    throw ConfigError("schedule has " + std::to_string(power.size()) + " slots, expected " +
                      std::to_string(c.env.horizon.num_slots));
  const auto dir = open_run(c);
  const auto d = run_day(e, report::evaluation_day_seed(c),
                         [&](const env::Environment& env, const env::EnvState&) {
                           return power[static_cast<std::size_t>(env.slot())];
                         });
  std::vector<allocation::TraceRow> rows;
  for (const auto& rec : e.records()) {
    for (std::size_t j = 0; j < rec.ev_index.size(); ++j) {
      const auto i = rec.ev_index[j];
      rows.push_back({rec.slot, e.fleet()[i].ev_id, rec.proposal.proposed[j],
                      rec.proposal.final_powers[j],
                      d.ev_energy[i][static_cast<std::size_t>(rec.slot + 1)] / d.ev_capacity[i]});
    }
  }
  allocation::write_trace(rows, dir / "trace.csv");
  write_schedule(d, dir / "schedule.csv");
  std::cout << rows.size() << " allocation rows\n";
  return 0;
}

int cmd_simulate_year(const Common& o, const std::string& checkpoint, const std::string& baseline) {
  const auto c = effective(o);
  std::optional<ppo::Policy> policy;
  const auto run = pick_runner(checkpoint, baseline, policy);
  const auto dir = open_run(c);
  const auto y = report::run_year(c, run);
  csv::Writer w({"day", "soh_mean", "soh_min"});
  w.add(0, y.initial_soh_mean, y.initial_soh_mean);
  for (std::size_t d = 0; d < y.soh_mean.size(); ++d) w.add(d + 1, y.soh_mean[d], y.soh_min[d]);
  w.save(dir / "soh_year.csv");
  json s{{"days", y.soh_mean.size()},
         {"soh_year_end", y.soh_mean.back()},
         {"charging_cost_per_day", y.charging_cost_mean},
         {"battery_cost_per_day", y.battery_cost_per_day},
         {"load_variance_mean", y.load_variance_mean}};
  csv::write_text(dir / "year.json", s.dump(2) + "\n");
  std::cout << "year-end SOH " << y.soh_mean.back() << "\n";
  return 0;
}

int cmd_report(const std::string& run_dir, std::optional<int> workers) {
  const fs::path dir = run_dir;
  if (!fs::exists(dir / "config.json"))
    throw MissingFileError("no config.json in run directory " + run_dir);
  auto c = load_config(dir / "config.json");
  if (workers) c.workers = *workers;
  c.validate();
  std::optional<ppo::Policy> policy;
  if (fs::exists(dir / "checkpoint.json")) policy = ppo::load_policy(dir / "checkpoint.json");
  const auto runs = report::run_strategies(c, policy);
  report::emit_reports(dir / "report", c, runs);
  for (const auto& r : runs)
    std::cout << r.name << ": SOH " << r.indices.soh_year_end << ", LV " << r.indices.load_variance
              << ", cost " << r.indices.total_cost << "\n";
  return 0;
}

int cmd_gen_profiles(const Common& o) {
  const auto c = effective(o);
  const auto dir = open_run(c);
  env::write_profiles(scenario_profiles(c), dir / "profiles.csv");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EV aggregator V2G scheduling simulator"};
  app.require_subcommand(1);

  Common o;
  std::string checkpoint, baseline, schedule, run_dir;
  std::optional<int> report_workers;

  auto* train = app.add_subcommand("train", "train the PPO scheduling policy");
  add_common(train, o);

  auto* evaluate = app.add_subcommand("evaluate", "run the evaluation day for a policy or baseline");
  add_common(evaluate, o);
  evaluate->add_option("--checkpoint", checkpoint, "policy checkpoint");
  evaluate->add_option("--baseline", baseline, "bl1..bl4")
      ->check(CLI::IsMember({"bl1", "bl2", "bl3", "bl4"}));

  auto* allocate = app.add_subcommand("allocate", "replay an EVA schedule and trace the allocation");
  add_common(allocate, o);
  allocate->add_option("--schedule", schedule, "schedule CSV with an eva_kw column")->required();

  auto* year = app.add_subcommand("simulate-year", "year of daily scheduling with SOH tracking");
  add_common(year, o);
  year->add_option("--checkpoint", checkpoint, "policy checkpoint");
  year->add_option("--baseline", baseline, "bl1..bl4")
      ->check(CLI::IsMember({"bl1", "bl2", "bl3", "bl4"}));

  auto* rep = app.add_subcommand("report", "write the report bundle for a run directory");
  rep->add_option("run_dir", run_dir, "run directory")->required();
  rep->add_option("--workers", report_workers, "worker threads");

  auto* gen = app.add_subcommand("gen-profiles", "write the synthetic grid profiles");
  add_common(gen, o);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(o);
    if (*evaluate) return cmd_evaluate(o, checkpoint, baseline);
    if (*allocate) return cmd_allocate(o, schedule);
    if (*year) return cmd_simulate_year(o, checkpoint, baseline);
    if (*rep) return cmd_report(run_dir, report_workers);
    if (*gen) return cmd_gen_profiles(o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
