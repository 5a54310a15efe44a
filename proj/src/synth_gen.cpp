#include "dsnsched/synth_gen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <json.hpp>

#include "dsnsched/errors.hpp"
#include "dsnsched/rng.hpp"

namespace dsnsched {

using json = nlohmann::ordered_json;

namespace {

constexpr Seconds kMinTrack = 1 * kSecondsPerHour;
constexpr Seconds kMaxTrack = 8 * kSecondsPerHour;

std::string two_digits(int n) {
  std::string s = std::to_string(n);
  return s.size() < 2 ? "0" + s : s;
}

Seconds round_minute(double seconds) {
  return static_cast<Seconds>(std::llround(seconds / 60.0)) * 60;
}

void check_config(const SynthConfig& c) {
  auto bad = [](const std::string& msg) { throw ConfigError(msg); };
  if (c.n_antennas < 1 || c.n_antennas > kAntennaSlots) {
    bad("n_antennas must be in [1, " + std::to_string(kAntennaSlots) + "]");
  }
  if (c.n_missions < 1) bad("n_missions must be positive");
  if (c.n_requests < 1 || c.n_requests > kMaxRequestSlots) {
    bad("n_requests must be in [1, " + std::to_string(kMaxRequestSlots) + "]");
  }
  if (c.total_requested_hours <= 0) bad("total_requested_hours must be positive");
  if (c.visibility_period <= 0 || c.visibility_period > kSecondsPerWeek) {
    bad("visibility_period out of range");
  }
  if (c.duty_cycle <= 0.0) {
    bad("duty_cycle must be positive when requests are generated");
  }
  if (c.duty_cycle > 1.0) bad("duty_cycle must not exceed 1");
  if (c.duty_cycle_jitter < 0.0) bad("duty_cycle_jitter must be nonnegative");
  if (c.maintenance_hours_per_day < 0 || c.maintenance_hours_per_day >= 24.0) {
    bad("maintenance_hours_per_day must be in [0, 24)");
  }
  if (c.array_fraction < 0.0 || c.array_fraction > 1.0) {
    bad("array_fraction must be in [0, 1]");
  }
  if (c.max_combos_per_request < 1) bad("max_combos_per_request must be positive");
  if (c.setup_seconds < 0 || c.teardown_seconds < 0) {
    bad("setup/teardown must be nonnegative");
  }
}

}  // namespace

WeekProblem generate_week(const SynthConfig& config) {
  check_config(config);
  Rng rng(config.rng_seed);

  WeekProblem problem;
  problem.week_label = config.week_label;
  problem.max_requests = kMaxRequestSlots;

  // Antennas with staggered daily maintenance blocks.
  const Seconds maint_len = round_minute(config.maintenance_hours_per_day * 3600);
  for (int a = 0; a < config.n_antennas; ++a) {
    Antenna antenna;
    antenna.id = "DSS-" + two_digits(a + 1);
    antenna.week_bounds = TimeWindow{0, kSecondsPerWeek};
    if (maint_len > 0) {
      WindowSet maintenance;
      Seconds offset = (static_cast<Seconds>(a) * kSecondsPerDay) /
                       config.n_antennas;
      for (Seconds day = 0; day < kSecondsPerWeek; day += kSecondsPerDay) {
        Seconds start = day + offset;
        Seconds end = std::min(start + maint_len, kSecondsPerWeek);
        if (start < end) maintenance.add({start, end});
      }
      antenna.maintenance = maintenance;
    }
    problem.antennas.push_back(std::move(antenna));
  }

  std::map<std::string, WindowSet> maintenance_by_antenna;
  for (const auto& a : problem.antennas) {
    maintenance_by_antenna[a.id] = a.maintenance;
  }

  // Periodic visibility blocks per (mission, antenna): one block per period,
  // phased by mission and shifted per antenna to mimic Earth rotation.
  const Seconds period = config.visibility_period;
  std::vector<std::map<std::string, WindowSet>> visibility(config.n_missions);
  for (int m = 0; m < config.n_missions; ++m) {
    Seconds phase = rng.uniform_int(0, period - 1);
    for (int a = 0; a < config.n_antennas; ++a) {
      double duty = std::clamp(
          config.duty_cycle + rng.uniform(-config.duty_cycle_jitter,
                                          config.duty_cycle_jitter),
          0.05, 0.95);
      Seconds block = round_minute(duty * static_cast<double>(period));
      if (block < 60) block = 60;
      Seconds shift = (static_cast<Seconds>(a) * period) / config.n_antennas;
      WindowSet windows;
      for (Seconds p = 0; p < kSecondsPerWeek; p += period) {
        Seconds jitter = rng.uniform_int(-1800, 1800);
        Seconds start = p + (phase + shift + jitter % period + period) % period;
        Seconds end = std::min(start + block, kSecondsPerWeek);
        if (start < end) windows.add({start, end});
      }
      visibility[m][problem.antennas[a].id] = std::move(windows);
    }
  }

  // Requested durations: windowed uniform around the per-request mean implied
  // by the total-hours target, clamped to the 1-8 h track range.
  const double target_total = config.total_requested_hours * 3600.0;
  const double mean = std::clamp(target_total / config.n_requests,
                                 static_cast<double>(kMinTrack),
                                 static_cast<double>(kMaxTrack));
  const double spread = std::max(
      std::min(mean - kMinTrack, kMaxTrack - mean), 2700.0);

  for (int i = 0; i < config.n_requests; ++i) {
    TrackRequest request;
    request.request_id = i;
    int mission = std::min(
        config.n_missions - 1,
        static_cast<int>(std::pow(rng.uniform(), 1.5) * config.n_missions));
    request.mission_id = "M" + two_digits(mission + 1);
    request.requested_duration = std::clamp(
        round_minute(rng.uniform(mean - spread, mean + spread)), kMinTrack,
        kMaxTrack);
    request.min_duration =
        std::clamp(round_minute(request.requested_duration *
                                rng.uniform(0.3, 1.0)),
                   Seconds{1800}, request.requested_duration);
    request.setup = config.setup_seconds;
    request.teardown = config.teardown_seconds;

    // Draw alternative combos; retry when every combo turns out blind, and
    // after eight blind draws drop the minimum duration to its floor so
    // requests normally end up with at least one usable view period.
    bool any = false;
    for (int attempt = 0; attempt < 16 && !any; ++attempt) {
      if (attempt == 8) request.min_duration = 1800;
      int n_combos = static_cast<int>(rng.uniform_int(
          1, std::min(config.max_combos_per_request,
                      config.n_antennas)));
      std::set<std::vector<std::string>> unique;
      for (int k = 0; k < n_combos; ++k) {
        bool array = rng.uniform() < config.array_fraction &&
                     config.n_antennas >= 2;
        std::vector<std::string> combo;
        int first = static_cast<int>(rng.uniform_int(0, config.n_antennas - 1));
        combo.push_back(problem.antennas[first].id);
        if (array) {
          int second;
          do {
            second = static_cast<int>(rng.uniform_int(0, config.n_antennas - 1));
          } while (second == first);
          combo.push_back(problem.antennas[second].id);
          std::sort(combo.begin(), combo.end());
        }
        unique.insert(std::move(combo));
      }
      request.antenna_combos.assign(unique.begin(), unique.end());
      request.view_periods = derive_valid_vps(request, visibility[mission],
                                              maintenance_by_antenna);
      for (const auto& set : request.view_periods) any = any || !set.empty();
      if (!any && attempt + 1 < 16) {
        request.antenna_combos.clear();
        request.view_periods.clear();
      }
    }
    problem.requests.push_back(std::move(request));
  }

  validate_problem(problem);
  return problem;
}

std::string synth_config_to_json(const SynthConfig& c) {
  json doc;
  doc["week_label"] = c.week_label;
  doc["n_antennas"] = c.n_antennas;
  doc["n_missions"] = c.n_missions;
  doc["n_requests"] = c.n_requests;
  doc["total_requested_hours"] = c.total_requested_hours;
  doc["visibility_period"] = c.visibility_period;
  doc["duty_cycle"] = c.duty_cycle;
  doc["duty_cycle_jitter"] = c.duty_cycle_jitter;
  doc["maintenance_hours_per_day"] = c.maintenance_hours_per_day;
  doc["array_fraction"] = c.array_fraction;
  doc["max_combos_per_request"] = c.max_combos_per_request;
  doc["setup_seconds"] = c.setup_seconds;
  doc["teardown_seconds"] = c.teardown_seconds;
  doc["rng_seed"] = c.rng_seed;
  return doc.dump(2) + "\n";
}

SynthConfig synth_config_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("generator config is not valid JSON: ") +
                     e.what());
  }
  SynthConfig c;
  try {
    if (doc.contains("week_label")) c.week_label = doc["week_label"];
    if (doc.contains("n_antennas")) c.n_antennas = doc["n_antennas"];
    if (doc.contains("n_missions")) c.n_missions = doc["n_missions"];
    if (doc.contains("n_requests")) c.n_requests = doc["n_requests"];
    if (doc.contains("total_requested_hours")) {
      c.total_requested_hours = doc["total_requested_hours"];
    }
    if (doc.contains("visibility_period")) {
      c.visibility_period = doc["visibility_period"];
    }
    if (doc.contains("duty_cycle")) c.duty_cycle = doc["duty_cycle"];
    if (doc.contains("duty_cycle_jitter")) {
      c.duty_cycle_jitter = doc["duty_cycle_jitter"];
    }
    if (doc.contains("maintenance_hours_per_day")) {
      c.maintenance_hours_per_day = doc["maintenance_hours_per_day"];
    }
    if (doc.contains("array_fraction")) c.array_fraction = doc["array_fraction"];
    if (doc.contains("max_combos_per_request")) {
      c.max_combos_per_request = doc["max_combos_per_request"];
    }
    if (doc.contains("setup_seconds")) c.setup_seconds = doc["setup_seconds"];
    if (doc.contains("teardown_seconds")) {
      c.teardown_seconds = doc["teardown_seconds"];
    }
    if (doc.contains("rng_seed")) c.rng_seed = doc["rng_seed"];
  } catch (const json::exception& e) {
    throw ParseError(std::string("generator config field has wrong type: ") +
                     e.what());
  }
  return c;
}

}  // namespace dsnsched
