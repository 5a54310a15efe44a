#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dsnsched/time_window.hpp"

namespace dsnsched {

// Observation layout is fixed: 3 aggregates + request slots + antenna slots.
constexpr int kMaxRequestSlots = 500;
constexpr int kAntennaSlots = 15;
constexpr int kObservationSize = 3 + kMaxRequestSlots + kAntennaSlots;

struct Antenna {
  std::string id;             // e.g. "DSS-03"
  TimeWindow week_bounds;     // schedulable horizon for the week
  WindowSet maintenance;      // subset of week_bounds
};

// One weekly tracking request. A combo is a set of antennas that must
// simultaneously support the track (an array); a request may list several
// alternative combos. view_periods[i] is the derived valid visibility for
// combos[i] (already net of maintenance and the min-duration pre-filter).
struct TrackRequest {
  int request_id = 0;  // dense 0-based index; defines the action order
  std::string mission_id;
  Seconds requested_duration = 0;
  Seconds min_duration = 0;
  Seconds setup = 0;
  Seconds teardown = 0;
  std::vector<std::vector<std::string>> antenna_combos;
  std::vector<WindowSet> view_periods;  // parallel to antenna_combos
};

struct WeekProblem {
  std::string week_label;
  std::vector<Antenna> antennas;
  std::vector<TrackRequest> requests;
  int max_requests = kMaxRequestSlots;

  int antenna_index(const std::string& id) const;  // -1 if unknown
  Seconds total_requested() const;
  // Sum over antennas of (week bounds - maintenance).
  Seconds total_available() const;
  int mission_count() const;
};

// A placed communication pass: on-air window plus optional setup before and
// teardown after on every antenna of the combo.
struct Track {
  int request_id = 0;
  int combo_index = 0;
  std::vector<std::string> combo;
  TimeWindow window;
  std::optional<TimeWindow> setup_window;     // ends at window.start
  std::optional<TimeWindow> teardown_window;  // starts at window.end
};

struct Schedule {
  std::vector<Track> tracks;
  // Busy time (setup + on-air + teardown) per antenna id.
  std::map<std::string, WindowSet> antenna_busy;

  Seconds allocated_for(int request_id) const;
};

// Validates every WeekProblem invariant; throws ValidationError naming the
// offending antenna or request_id.
void validate_problem(const WeekProblem& problem);

// Per-combo valid view periods: intersect members' (raw visibility minus
// maintenance), then drop windows shorter than the request's min_duration.
// Throws ConfigError when a combo member has no raw visibility entry.
std::vector<WindowSet> derive_valid_vps(
    const TrackRequest& request,
    const std::map<std::string, WindowSet>& raw_vps,
    const std::map<std::string, WindowSet>& maintenance);

// Full feasibility audit of a schedule against its problem: per-antenna
// non-overlap, maintenance avoidance, week-bounds containment, view-period
// containment of on-air time, min-duration, setup/teardown adjacency.
// Returns human-readable violations; empty means feasible.
std::vector<std::string> audit_schedule(const WeekProblem& problem,
                                        const Schedule& schedule);

}  // namespace dsnsched
