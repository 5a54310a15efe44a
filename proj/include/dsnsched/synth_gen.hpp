#pragma once

#include <cstdint>
#include <string>

#include "dsnsched/problem.hpp"

namespace dsnsched {

// Knobs for the synthetic oversubscribed-week generator. Defaults target the
// shape of a heavy DSN week: 286 requests totalling ~1770 hours across 15
// antennas and 30 missions.
struct SynthConfig {
  std::string week_label = "synthetic-week";
  int n_antennas = 15;
  int n_missions = 30;
  int n_requests = 286;
  double total_requested_hours = 1770.0;
  // Visibility: per mission-antenna pair, one block per visibility period.
  Seconds visibility_period = kSecondsPerDay;
  double duty_cycle = 0.35;         // visible fraction of each period
  double duty_cycle_jitter = 0.10;  // per-pair spread around duty_cycle
  // Maintenance: daily blocks per antenna, staggered across antennas.
  double maintenance_hours_per_day = 8.0;
  double array_fraction = 0.15;  // share of combos needing two antennas
  int max_combos_per_request = 3;
  Seconds setup_seconds = 3600;
  Seconds teardown_seconds = 900;
  std::uint64_t rng_seed = 0;
};

SynthConfig synth_config_from_json(const std::string& text);
std::string synth_config_to_json(const SynthConfig& config);

// Deterministic function of the config (including seed). The result passes
// validate_problem; view periods come from derive_valid_vps over periodic
// per-mission visibility blocks net of maintenance.
// Throws ConfigError on infeasible settings.
WeekProblem generate_week(const SynthConfig& config);

}  // namespace dsnsched
