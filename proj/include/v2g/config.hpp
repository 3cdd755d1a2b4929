#pragma once

// Run configuration: JSON with one object per section. Every field has a
// default; unknown keys are rejected so typos fail loudly.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include "v2g/allocation.hpp"
#include "v2g/battery.hpp"
#include "v2g/env.hpp"
#include "v2g/error.hpp"
#include "v2g/fleet.hpp"
#include "v2g/json_util.hpp"
#include "v2g/ppo.hpp"
#include "v2g/profiles.hpp"
#include "v2g/rng.hpp"

namespace v2g {

struct RunConfig {
  std::uint64_t seed = 1;
  std::string profiles_path;  // empty: synthetic profiles
  std::string fleet_path;     // empty: sampled fleet
  std::string out_dir = "run";
  int workers = 1;

  env::EnvConfig env;
  env::SyntheticProfileParams synthetic;
  env::RewardWeights reward;

  int fleet_size = 509;
  fleet::FleetDistributions dists;
  fleet::EvSpec ev;

  battery::CellSpec cell;
  battery::PackTopology topology;
  battery::SohModelParams soh;
  battery::DegradationCostParams degradation;

  ppo::PpoHyper ppo;

  allocation::StakeParams stake;
  allocation::SettlementParams settlement;

  int year_days = 365;
  double year_initial_soh = 97.46;

  void validate() const {
    env.validate();
    reward.validate();
    if (fleet_size < 0) throw ConfigError("fleet.size must be >= 0");
    ev.validate();
    cell.validate();
    topology.validate();
    soh.validate();
    degradation.validate();
    ppo.validate();
    if (ppo.episode_length != env.horizon.num_slots)
      throw ConfigError("ppo.episode_length must equal env.num_slots");
    if (!(stake.locked_fraction >= 0.0)) throw ConfigError("allocation.locked_fraction must be >= 0");
    if (!(settlement.penalty_rate >= 0.0)) throw ConfigError("allocation.penalty_rate must be >= 0");
    if (year_days < 1) throw ConfigError("metrics.year_days must be >= 1");
    if (!(year_initial_soh > 0.0 && year_initial_soh <= 100.0))
      throw ConfigError("metrics.initial_soh must lie in (0, 100]");
    if (workers < 1) throw ConfigError("workers must be >= 1");
  }
};

inline std::string to_string(env::SignMode m) {
  return m == env::SignMode::paper_literal ? "paper_literal" : "corrected";
}

inline env::SignMode parse_sign_mode(const std::string& s) {
  if (s == "paper_literal") return env::SignMode::paper_literal;
  if (s == "corrected") return env::SignMode::corrected;
  throw ConfigError("sign mode must be paper_literal or corrected, got '" + s + "'");
}

namespace detail {

inline json normal_json(const fleet::ClippedNormal& n) {
  return {{"mean", n.mean}, {"stddev", n.stddev}, {"min", n.lo}, {"max", n.hi}};
}

inline void read_normal(const json& j, fleet::ClippedNormal& n, const std::string& where) {
  StrictObject o(j, where);
  o.get("mean", n.mean);
  o.get("stddev", n.stddev);
  o.get("min", n.lo);
  o.get("max", n.hi);
  o.finish();
  if (!(n.lo <= n.hi) || n.stddev < 0.0) throw ConfigError(where + ": invalid distribution");
}

inline json window_json(const battery::SocWindow& w) { return {w.min, w.max}; }

inline void read_window(const json& j, battery::SocWindow& w, const std::string& where) {
  if (!j.is_array() || j.size() != 2) throw ConfigError(where + ": expected [min, max]");
  try {
    w.min = j[0].get<double>();
    w.max = j[1].get<double>();
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

}  // namespace detail

inline json to_json(const RunConfig& c) {
  json ocv = json::array();
  for (const auto& p : c.cell.ocv) ocv.push_back({p.soc, p.volts});
  return json{
      {"seed", c.seed},
      {"paths", {{"profiles", c.profiles_path}, {"fleet", c.fleet_path}, {"out", c.out_dir}}},
      {"workers", c.workers},
      {"env",
       {{"transformer_kva", c.env.transformer_kva},
        {"power_factor", c.env.power_factor},
        {"grid_min_kw", c.env.grid_min_kw},
        {"start_hour", c.env.horizon.start_hour},
        {"num_slots", c.env.horizon.num_slots},
        {"slot_hours", c.env.horizon.slot_hours},
        {"sop_limits", c.env.sop_limits},
        {"synthetic",
         {{"base_mean_kw", c.synthetic.base_mean_kw},
          {"base_amplitude_kw", c.synthetic.base_amplitude_kw},
          {"base_peak_hour", c.synthetic.base_peak_hour},
          {"base_noise_kw", c.synthetic.base_noise_kw},
          {"pv_peak_kw", c.synthetic.pv_peak_kw},
          {"pv_width_h", c.synthetic.pv_width_h},
          {"wind_mean_kw", c.synthetic.wind_mean_kw},
          {"wind_noise_kw", c.synthetic.wind_noise_kw},
          {"tariff_valley", c.synthetic.tariff_valley},
          {"tariff_flat", c.synthetic.tariff_flat},
          {"tariff_peak", c.synthetic.tariff_peak}}}}},
      {"reward",
       {{"alpha", c.reward.alpha},
        {"beta", c.reward.beta},
        {"psi", c.reward.psi},
        {"chi", c.reward.chi},
        {"upsilon", c.reward.upsilon},
        {"rho", c.reward.rho},
        {"denom_floor", c.reward.denom_floor},
        {"sign_mode", to_string(c.reward.sign_mode)}}},
      {"fleet",
       {{"size", c.fleet_size},
        {"arrival_hour", detail::normal_json(c.dists.arrival)},
        {"departure_hour", detail::normal_json(c.dists.departure)},
        {"initial_soc", detail::normal_json(c.dists.soc)},
        {"initial_soh", c.dists.initial_soh},
        {"initial_efc", c.dists.initial_efc},
        {"max_resample", c.dists.max_resample},
        {"capacity_kwh", c.ev.capacity_kwh},
        {"p_ch_max_kw", c.ev.p_ch_max},
        {"p_dis_max_kw", c.ev.p_dis_max},
        {"efficiency", c.ev.efficiency},
        {"soc_window", detail::window_json(c.ev.soc_window)},
        {"departure_band", detail::window_json(c.ev.departure_band)}}},
      {"battery",
       {{"nominal_voltage", c.cell.nominal_voltage},
        {"rated_capacity_ah", c.cell.rated_capacity_ah},
        {"r0", c.cell.r0},
        {"ocv", ocv},
        {"u_t_min", c.cell.u_t_min},
        {"u_t_max", c.cell.u_t_max},
        {"i_design_ch", c.cell.i_design_ch},
        {"i_design_dis", c.cell.i_design_dis},
        {"cells_in_series", c.topology.cells_in_series},
        {"parallel_branches", c.topology.parallel_branches},
        {"cycle_constant", c.soh.cycle_constant},
        {"dod_exponent", c.soh.dod_exponent},
        {"discharge_current_exponent", c.soh.discharge_current_exponent},
        {"charge_current_exponent", c.soh.charge_current_exponent},
        {"efc_constant", c.soh.efc_constant},
        {"unit_battery_cost", c.degradation.unit_battery_cost},
        {"labor_cost", c.degradation.labor_cost},
        {"soh_min", c.degradation.soh_min}}},
      {"ppo", c.ppo},
      {"allocation",
       {{"locked_fraction", c.stake.locked_fraction},
        {"penalty_rate", c.settlement.penalty_rate}}},
      {"metrics", {{"year_days", c.year_days}, {"initial_soh", c.year_initial_soh}}}};
}

inline void apply_json(const json& j, RunConfig& c) {
  StrictObject root(j, "config");
  root.get("seed", c.seed);
  root.get("workers", c.workers);
  if (root.has("paths")) {
    StrictObject o(root.at("paths"), "paths");
    o.get("profiles", c.profiles_path);
    o.get("fleet", c.fleet_path);
    o.get("out", c.out_dir);
    o.finish();
  }
  if (root.has("env")) {
    StrictObject o(root.at("env"), "env");
    o.get("transformer_kva", c.env.transformer_kva);
    o.get("power_factor", c.env.power_factor);
    o.get("grid_min_kw", c.env.grid_min_kw);
    o.get("start_hour", c.env.horizon.start_hour);
    o.get("num_slots", c.env.horizon.num_slots);
    o.get("slot_hours", c.env.horizon.slot_hours);
    o.get("sop_limits", c.env.sop_limits);
    if (o.has("synthetic")) {
      StrictObject s(o.at("synthetic"), "env.synthetic");
      auto& p = c.synthetic;
      s.get("base_mean_kw", p.base_mean_kw);
      s.get("base_amplitude_kw", p.base_amplitude_kw);
      s.get("base_peak_hour", p.base_peak_hour);
      s.get("base_noise_kw", p.base_noise_kw);
      s.get("pv_peak_kw", p.pv_peak_kw);
      s.get("pv_width_h", p.pv_width_h);
      s.get("wind_mean_kw", p.wind_mean_kw);
      s.get("wind_noise_kw", p.wind_noise_kw);
      s.get("tariff_valley", p.tariff_valley);
      s.get("tariff_flat", p.tariff_flat);
      s.get("tariff_peak", p.tariff_peak);
      s.finish();
    }
    o.finish();
  }
  if (root.has("reward")) {
    StrictObject o(root.at("reward"), "reward");
    o.get("alpha", c.reward.alpha);
    o.get("beta", c.reward.beta);
    o.get("psi", c.reward.psi);
    o.get("chi", c.reward.chi);
    o.get("upsilon", c.reward.upsilon);
    o.get("rho", c.reward.rho);
    o.get("denom_floor", c.reward.denom_floor);
    std::string mode = to_string(c.reward.sign_mode);
    o.get("sign_mode", mode);
    c.reward.sign_mode = parse_sign_mode(mode);
    o.finish();
  }
  if (root.has("fleet")) {
    StrictObject o(root.at("fleet"), "fleet");
    o.get("size", c.fleet_size);
    if (o.has("arrival_hour")) detail::read_normal(o.at("arrival_hour"), c.dists.arrival, "fleet.arrival_hour");
    if (o.has("departure_hour"))
      detail::read_normal(o.at("departure_hour"), c.dists.departure, "fleet.departure_hour");
    if (o.has("initial_soc")) detail::read_normal(o.at("initial_soc"), c.dists.soc, "fleet.initial_soc");
    o.get("initial_soh", c.dists.initial_soh);
    o.get("initial_efc", c.dists.initial_efc);
    o.get("max_resample", c.dists.max_resample);
    o.get("capacity_kwh", c.ev.capacity_kwh);
    o.get("p_ch_max_kw", c.ev.p_ch_max);
    o.get("p_dis_max_kw", c.ev.p_dis_max);
    o.get("efficiency", c.ev.efficiency);
    if (o.has("soc_window")) detail::read_window(o.at("soc_window"), c.ev.soc_window, "fleet.soc_window");
    if (o.has("departure_band"))
      detail::read_window(o.at("departure_band"), c.ev.departure_band, "fleet.departure_band");
    o.finish();
  }
  if (root.has("battery")) {
    StrictObject o(root.at("battery"), "battery");
    o.get("nominal_voltage", c.cell.nominal_voltage);
    o.get("rated_capacity_ah", c.cell.rated_capacity_ah);
    o.get("r0", c.cell.r0);
    if (o.has("ocv")) {
      const auto& arr = o.at("ocv");
      if (!arr.is_array()) throw ConfigError("battery.ocv: expected [[soc, volts], ...]");
      c.cell.ocv.clear();
      for (const auto& p : arr) {
        if (!p.is_array() || p.size() != 2) throw ConfigError("battery.ocv: expected [soc, volts] pairs");
        c.cell.ocv.push_back({p[0].get<double>(), p[1].get<double>()});
      }
    }
    o.get("u_t_min", c.cell.u_t_min);
    o.get("u_t_max", c.cell.u_t_max);
    o.get("i_design_ch", c.cell.i_design_ch);
    o.get("i_design_dis", c.cell.i_design_dis);
    o.get("cells_in_series", c.topology.cells_in_series);
    o.get("parallel_branches", c.topology.parallel_branches);
    o.get("cycle_constant", c.soh.cycle_constant);
    o.get("dod_exponent", c.soh.dod_exponent);
    o.get("discharge_current_exponent", c.soh.discharge_current_exponent);
    o.get("charge_current_exponent", c.soh.charge_current_exponent);
    o.get("efc_constant", c.soh.efc_constant);
    o.get("unit_battery_cost", c.degradation.unit_battery_cost);
    o.get("labor_cost", c.degradation.labor_cost);
    o.get("soh_min", c.degradation.soh_min);
    o.finish();
  }
  if (root.has("ppo")) ppo::read_hyper(root.at("ppo"), c.ppo);
  if (root.has("allocation")) {
    StrictObject o(root.at("allocation"), "allocation");
    o.get("locked_fraction", c.stake.locked_fraction);
    o.get("penalty_rate", c.settlement.penalty_rate);
    o.finish();
  }
  if (root.has("metrics")) {
    StrictObject o(root.at("metrics"), "metrics");
    o.get("year_days", c.year_days);
    o.get("initial_soh", c.year_initial_soh);
    o.finish();
  }
  root.finish();
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingFileError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  RunConfig c;
  apply_json(j, c);
  return c;
}

// Config file from the explicit path, else from V2G_SIM_CONFIG, else
// defaults.
inline RunConfig resolve_config(const std::optional<std::string>& path) {
  if (path && !path->empty()) return load_config(*path);
  if (const char* env_path = std::getenv("V2G_SIM_CONFIG"); env_path && *env_path)
    return load_config(env_path);
  return RunConfig{};
}

inline void save_config(const RunConfig& c, const std::filesystem::path& path) {
  csv::write_text(path, to_json(c).dump(2) + "\n");
}

// ---- scenario ------------------------------------------------------------

inline env::GridProfiles scenario_profiles(const RunConfig& c) {
  if (!c.profiles_path.empty()) {
    if (!std::filesystem::exists(c.profiles_path))
      throw MissingFileError("profiles file not found: " + c.profiles_path);
    return env::read_profiles(c.profiles_path);
  }
  return env::synthetic_profiles(derive_seed(c.seed, stream::profiles), c.synthetic);
}

inline std::vector<fleet::EvSession> scenario_fleet(const RunConfig& c) {
  if (!c.fleet_path.empty()) {
    if (!std::filesystem::exists(c.fleet_path))
      throw MissingFileError("fleet file not found: " + c.fleet_path);
    return fleet::read_fleet(c.fleet_path, c.ev, c.dists);
  }
  return fleet::sample_fleet(c.fleet_size, derive_seed(c.seed, stream::fleet), c.dists, c.ev,
                             c.env.horizon);
}

inline env::Environment make_environment(const RunConfig& c, std::vector<fleet::EvSession> fleet,
                                         const env::GridProfiles& profiles) {
  return env::Environment(c.env, c.reward, profiles, std::move(fleet), c.cell, c.topology, c.stake);
}

inline env::Environment make_environment(const RunConfig& c) {
  return make_environment(c, scenario_fleet(c), scenario_profiles(c));
}

}  // namespace v2g
