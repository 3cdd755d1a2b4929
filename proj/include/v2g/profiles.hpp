#pragma once

// Hourly grid profiles (baseload, PV, wind, time-of-use tariff) indexed by
// clock hour, plus a synthetic generator and CSV ingestion.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <vector>

#include "v2g/csv.hpp"
#include "v2g/error.hpp"

namespace v2g::env {

struct GridProfiles {
  std::vector<double> baseload_kw;
  std::vector<double> pv_kw;
  std::vector<double> wind_kw;
  std::vector<double> tariff;  // $/kWh

  std::size_t size() const { return baseload_kw.size(); }

  void validate() const {
    const auto n = baseload_kw.size();
    if (n == 0) throw ConfigError("profiles are empty");
    if (pv_kw.size() != n || wind_kw.size() != n || tariff.size() != n)
      throw ConfigError("profile series must all have the same length");
    for (std::size_t i = 0; i < n; ++i) {
      if (!(tariff[i] > 0.0)) throw ConfigError("tariff must be positive");
      if (baseload_kw[i] < 0.0) throw ConfigError("baseload must be >= 0");
      if (pv_kw[i] < 0.0 || wind_kw[i] < 0.0)
        throw ConfigError("renewable generation must be >= 0");
    }
  }

  // Load seen by the transformer with zero EVA power.
  double net_of_renewables(int hour) const {
    const auto h = static_cast<std::size_t>(hour) % size();
    return baseload_kw[h] - pv_kw[h] - wind_kw[h];
  }
};

struct SyntheticProfileParams {
  double base_mean_kw = 1500.0;
  double base_amplitude_kw = 550.0;
  int base_peak_hour = 19;
  double base_noise_kw = 25.0;
  double pv_peak_kw = 700.0;
  double pv_width_h = 2.5;
  double wind_mean_kw = 300.0;
  double wind_noise_kw = 80.0;
  double tariff_valley = 0.05;
  double tariff_flat = 0.10;
  double tariff_peak = 0.18;
};

// Sinusoidal baseload peaking in the evening, a PV bell centred on noon,
// AR(1) wind and a three-tier TOU schedule.
inline GridProfiles synthetic_profiles(std::uint64_t seed,
                                       const SyntheticProfileParams& p = {}) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  GridProfiles g;
  g.baseload_kw.resize(24);
  g.pv_kw.resize(24);
  g.wind_kw.resize(24);
  g.tariff.resize(24);
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double wind_state = 0.0;
  for (int h = 0; h < 24; ++h) {
    const double phase = two_pi * (h - p.base_peak_hour) / 24.0;
    const double base = p.base_mean_kw + p.base_amplitude_kw * std::cos(phase) +
                        0.25 * p.base_amplitude_kw * std::cos(2.0 * phase) +
                        p.base_noise_kw * unit(rng);
    g.baseload_kw[h] = std::max(0.0, base);

    const double x = (h - 12.0) / p.pv_width_h;
    g.pv_kw[h] = (h >= 6 && h <= 18) ? p.pv_peak_kw * std::exp(-x * x) : 0.0;

    wind_state = 0.7 * wind_state + unit(rng);
    g.wind_kw[h] = std::max(0.0, p.wind_mean_kw + p.wind_noise_kw * wind_state);

    if (h < 7 || h == 23)
      g.tariff[h] = p.tariff_valley;
    else if ((h >= 11 && h <= 14) || (h >= 18 && h <= 20))
      g.tariff[h] = p.tariff_peak;
    else
      g.tariff[h] = p.tariff_flat;
  }
  return g;
}

inline void write_profiles(const GridProfiles& g,
                           const std::filesystem::path& path) {
  csv::Writer w({"slot", "baseload_kw", "pv_kw", "wind_kw", "tariff"});
  for (std::size_t h = 0; h < g.size(); ++h)
    w.add(h, g.baseload_kw[h], g.pv_kw[h], g.wind_kw[h], g.tariff[h]);
  w.save(path);
}

inline GridProfiles read_profiles(const std::filesystem::path& path) {
  auto t = csv::read(path);
  const auto c_slot = t.column("slot");
  const auto c_base = t.column("baseload_kw");
  const auto c_pv = t.column("pv_kw");
  const auto c_wt = t.column("wind_kw");
  const auto c_tar = t.column("tariff");
  const std::string ctx = path.string();
  GridProfiles g;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    if (csv::to_int(r[c_slot], ctx) != static_cast<long long>(i))
      throw ConfigError(ctx + ": slots must be consecutive from 0");
    g.baseload_kw.push_back(csv::to_double(r[c_base], ctx));
    g.pv_kw.push_back(csv::to_double(r[c_pv], ctx));
    g.wind_kw.push_back(csv::to_double(r[c_wt], ctx));
    g.tariff.push_back(csv::to_double(r[c_tar], ctx));
  }
  g.validate();
  if (g.size() != 24)
    throw ConfigError(ctx + ": expected 24 hourly rows, got " +
                      std::to_string(g.size()));
  return g;
}

}  // namespace v2g::env
