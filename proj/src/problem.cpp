#include "dsnsched/problem.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "dsnsched/errors.hpp"

namespace dsnsched {

int WeekProblem::antenna_index(const std::string& id) const {
  for (std::size_t i = 0; i < antennas.size(); ++i) {
    if (antennas[i].id == id) return static_cast<int>(i);
  }
  return -1;
}

Seconds WeekProblem::total_requested() const {
  Seconds total = 0;
  for (const auto& r : requests) total += r.requested_duration;
  return total;
}

Seconds WeekProblem::total_available() const {
  Seconds total = 0;
  for (const auto& a : antennas) {
    total += a.week_bounds.duration() - a.maintenance.total_duration();
  }
  return total;
}

int WeekProblem::mission_count() const {
  std::set<std::string> missions;
  for (const auto& r : requests) missions.insert(r.mission_id);
  return static_cast<int>(missions.size());
}

Seconds Schedule::allocated_for(int request_id) const {
  Seconds total = 0;
  for (const auto& t : tracks) {
    if (t.request_id == request_id) total += t.window.duration();
  }
  return total;
}

namespace {

std::string req_tag(int id) {
  return "request " + std::to_string(id);
}

}  // namespace

void validate_problem(const WeekProblem& problem) {
  if (problem.max_requests < 1 || problem.max_requests > kMaxRequestSlots) {
    throw ValidationError("max_requests must be in [1, " +
                          std::to_string(kMaxRequestSlots) + "]");
  }
  if (static_cast<int>(problem.requests.size()) > problem.max_requests) {
    throw ValidationError("problem has " +
                          std::to_string(problem.requests.size()) +
                          " requests, above max_requests " +
                          std::to_string(problem.max_requests));
  }
  if (static_cast<int>(problem.antennas.size()) > kAntennaSlots) {
    throw ValidationError("problem has more than " +
                          std::to_string(kAntennaSlots) + " antennas");
  }
  std::set<std::string> seen_ids;
  for (const auto& a : problem.antennas) {
    if (a.id.empty()) throw ValidationError("antenna with empty id");
    if (!seen_ids.insert(a.id).second) {
      throw ValidationError("duplicate antenna id " + a.id);
    }
    if (a.week_bounds.start < 0 || a.week_bounds.start >= a.week_bounds.end) {
      throw ValidationError("antenna " + a.id + ": invalid week bounds");
    }
    for (const auto& m : a.maintenance.windows()) {
      if (!a.week_bounds.contains(m)) {
        throw ValidationError("antenna " + a.id +
                              ": maintenance outside week bounds");
      }
    }
  }
  for (std::size_t i = 0; i < problem.requests.size(); ++i) {
    const auto& r = problem.requests[i];
    if (r.request_id != static_cast<int>(i)) {
      throw ValidationError(req_tag(r.request_id) + ": ids must be dense 0.." +
                            std::to_string(problem.requests.size() - 1) +
                            " in document order");
    }
    if (r.mission_id.empty()) {
      throw ValidationError(req_tag(r.request_id) + ": empty mission_id");
    }
    if (r.min_duration <= 0 || r.min_duration > r.requested_duration) {
      throw ValidationError(req_tag(r.request_id) +
                            ": requires 0 < min_duration <= requested_duration");
    }
    if (r.setup < 0 || r.teardown < 0) {
      throw ValidationError(req_tag(r.request_id) +
                            ": negative setup or teardown");
    }
    if (r.antenna_combos.empty()) {
      throw ValidationError(req_tag(r.request_id) + ": no antenna combos");
    }
    if (r.view_periods.size() != r.antenna_combos.size()) {
      throw ValidationError(req_tag(r.request_id) +
                            ": view_periods do not match antenna_combos");
    }
    for (const auto& combo : r.antenna_combos) {
      if (combo.empty()) {
        throw ValidationError(req_tag(r.request_id) + ": empty combo");
      }
      for (const auto& id : combo) {
        if (problem.antenna_index(id) < 0) {
          throw ValidationError(req_tag(r.request_id) +
                                ": unknown antenna " + id);
        }
      }
    }
  }
}

std::vector<WindowSet> derive_valid_vps(
    const TrackRequest& request,
    const std::map<std::string, WindowSet>& raw_vps,
    const std::map<std::string, WindowSet>& maintenance) {
  std::vector<WindowSet> result;
  result.reserve(request.antenna_combos.size());
  for (const auto& combo : request.antenna_combos) {
    std::vector<WindowSet> visible;
    visible.reserve(combo.size());
    for (const auto& antenna_id : combo) {
      auto raw = raw_vps.find(antenna_id);
      if (raw == raw_vps.end()) {
        throw ConfigError("no raw view periods for antenna " + antenna_id);
      }
      auto maint = maintenance.find(antenna_id);
      if (maint != maintenance.end()) {
        visible.push_back(subtract(raw->second, maint->second));
      } else {
        visible.push_back(raw->second);
      }
    }
    WindowSet overlap = intersect_all(visible);
    std::vector<TimeWindow> kept;
    for (const auto& w : overlap.windows()) {
      if (w.duration() >= request.min_duration) kept.push_back(w);
    }
    result.emplace_back(std::move(kept));
  }
  return result;
}

std::vector<std::string> audit_schedule(const WeekProblem& problem,
                                        const Schedule& schedule) {
  std::vector<std::string> violations;
  auto fail = [&](const std::string& msg) { violations.push_back(msg); };

  // Per-antenna occupancy, rebuilt from the tracks themselves.
  std::map<std::string, std::vector<TimeWindow>> occupancy;
  for (const auto& t : schedule.tracks) {
    if (t.request_id < 0 ||
        t.request_id >= static_cast<int>(problem.requests.size())) {
      fail("track references unknown " + req_tag(t.request_id));
      continue;
    }
    const auto& req = problem.requests[t.request_id];
    if (t.window.duration() < req.min_duration) {
      fail(req_tag(t.request_id) + ": track below min_duration");
    }
    if (t.combo_index < 0 ||
        t.combo_index >= static_cast<int>(req.antenna_combos.size())) {
      fail(req_tag(t.request_id) + ": bad combo index");
      continue;
    }
    if (!problem.requests[t.request_id]
             .view_periods[t.combo_index]
             .contains(t.window)) {
      fail(req_tag(t.request_id) + ": on-air window outside valid view periods");
    }
    if (t.setup_window && t.setup_window->end != t.window.start) {
      fail(req_tag(t.request_id) + ": setup not adjacent to on-air window");
    }
    if (t.teardown_window && t.teardown_window->start != t.window.end) {
      fail(req_tag(t.request_id) + ": teardown not adjacent to on-air window");
    }
    if (req.setup > 0 &&
        (!t.setup_window || t.setup_window->duration() != req.setup)) {
      fail(req_tag(t.request_id) + ": missing or mis-sized setup window");
    }
    if (req.teardown > 0 &&
        (!t.teardown_window || t.teardown_window->duration() != req.teardown)) {
      fail(req_tag(t.request_id) + ": missing or mis-sized teardown window");
    }
    TimeWindow busy{t.setup_window ? t.setup_window->start : t.window.start,
                    t.teardown_window ? t.teardown_window->end : t.window.end};
    for (const auto& antenna_id : t.combo) {
      occupancy[antenna_id].push_back(busy);
    }
  }

  for (auto& [antenna_id, windows] : occupancy) {
    int idx = problem.antenna_index(antenna_id);
    if (idx < 0) {
      fail("schedule uses unknown antenna " + antenna_id);
      continue;
    }
    const Antenna& antenna = problem.antennas[idx];
    std::sort(windows.begin(), windows.end(),
              [](const TimeWindow& a, const TimeWindow& b) {
                return a.start < b.start;
              });
    for (std::size_t i = 0; i < windows.size(); ++i) {
      if (i + 1 < windows.size() && windows[i + 1].start < windows[i].end) {
        fail("antenna " + antenna_id + ": overlapping tracks");
      }
      if (!antenna.week_bounds.contains(windows[i])) {
        fail("antenna " + antenna_id + ": track outside week bounds");
      }
      for (const auto& m : antenna.maintenance.windows()) {
        if (m.overlaps(windows[i])) {
          fail("antenna " + antenna_id + ": track overlaps maintenance");
        }
      }
    }
  }

  // Per-request allocation must not exceed the weekly request.
  for (const auto& r : problem.requests) {
    if (schedule.allocated_for(r.request_id) > r.requested_duration) {
      fail(req_tag(r.request_id) + ": allocated more than requested");
    }
  }
  return violations;
}

}  // namespace dsnsched
