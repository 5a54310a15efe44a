#include "dsnsched/env.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <set>

#include "dsnsched/errors.hpp"

namespace dsnsched {

SchedEnv::SchedEnv(std::shared_ptr<const WeekProblem> problem)
    : problem_(std::move(problem)) {
  if (!problem_) throw ContractError("SchedEnv requires a problem");
  validate_problem(*problem_);
  std::map<std::string, int> mission_ids;
  for (const auto& request : problem_->requests) {
    auto [it, inserted] = mission_ids.emplace(
        request.mission_id, static_cast<int>(mission_ids.size()));
    mission_of_request_.push_back(it->second);
  }
  n_missions_ = static_cast<int>(mission_ids.size());
  observation_.assign(kObservationSize, 0.0);
}

Observation SchedEnv::reset(std::uint64_t seed) {
  episode_seed_ = seed;
  rng_ = Rng(seed);
  antenna_free_.clear();
  for (const auto& antenna : problem_->antennas) {
    antenna_free_[antenna.id] =
        subtract(WindowSet({antenna.week_bounds}), antenna.maintenance);
  }
  schedule_ = Schedule{};
  remaining_.clear();
  for (const auto& request : problem_->requests) {
    remaining_.push_back(request.requested_duration);
  }
  n_steps_ = 0;
  episode_live_ = true;
  trace_.clear();
  rebuild_observation();
  return observation_;
}

std::vector<bool> SchedEnv::action_mask() const {
  std::vector<bool> mask(problem_->max_requests, false);
  for (std::size_t i = 0; i < remaining_.size(); ++i) {
    mask[i] = remaining_[i] > 0;
  }
  return mask;
}

bool SchedEnv::done() const {
  if (!episode_live_) return true;
  bool all_satisfied = true;
  for (Seconds r : remaining_) all_satisfied = all_satisfied && r == 0;
  return all_satisfied ||
         n_steps_ >= 2 * static_cast<int>(problem_->requests.size());
}

Observation SchedEnv::observation() const { return observation_; }

StepResult SchedEnv::step(int action) {
  if (action < 0 || action >= problem_->max_requests) {
    throw ContractError("action " + std::to_string(action) +
                        " outside [0, " +
                        std::to_string(problem_->max_requests) + ")");
  }
  if (!episode_live_) throw ContractError("step before reset");
  if (done()) throw ContractError("step on a finished episode");

  StepResult result;
  const bool selectable =
      action < static_cast<int>(remaining_.size()) && remaining_[action] > 0;

  TraceRow row;
  row.step = n_steps_;
  row.action = action;
  row.masked = !selectable;

  if (selectable) {
    const TrackRequest& request = problem_->requests[action];
    if (auto allocation = allocate_request(request)) {
      remaining_[action] -= allocation->allocated;
      result.reward = static_cast<double>(allocation->allocated) /
                      static_cast<double>(request.requested_duration);
      result.info.allocated_seconds = allocation->allocated;
      result.info.combo_index = allocation->track.combo_index;
      result.info.combo = allocation->track.combo;
      schedule_.tracks.push_back(std::move(allocation->track));
    }
  }
  n_steps_ += 1;
  rebuild_observation();

  result.observation = observation_;
  result.done = done();
  result.info.mask = action_mask();

  row.reward = result.reward;
  row.allocated_seconds = result.info.allocated_seconds;
  for (std::size_t i = 0; i < result.info.combo.size(); ++i) {
    if (i) row.combo += '+';
    row.combo += result.info.combo[i];
  }
  trace_.push_back(std::move(row));
  return result;
}

bool SchedEnv::is_valid_candidate(
    const TimeWindow& window, const TrackRequest& request,
    const std::vector<const WindowSet*>& member_free) {
  const Seconds length = window.duration();
  const Seconds escape =
      request.min_duration + request.setup + request.teardown;

  bool left_busy = false;
  bool right_busy = false;
  if (request.setup > 0) {
    for (const WindowSet* free : member_free) {
      left_busy = left_busy ||
                  !free->contains({window.start - request.setup, window.start});
    }
  }
  if (request.teardown > 0) {
    for (const WindowSet* free : member_free) {
      right_busy = right_busy ||
                   !free->contains({window.end, window.end + request.teardown});
    }
  }

  const bool long_enough = length >= escape;
  validity_cases_[(left_busy ? 4 : 0) | (right_busy ? 2 : 0) |
                  (long_enough ? 1 : 0)] += 1;

  if (length < request.min_duration) return false;
  if (left_busy && !long_enough) return false;
  if (right_busy && !long_enough) return false;
  return true;
}

std::optional<SchedEnv::Allocation> SchedEnv::allocate_request(
    const TrackRequest& request) {
  const Seconds want = remaining_[request.request_id];
  if (want < request.min_duration) return std::nullopt;

  int best_combo = -1;
  TimeWindow best_window{0, 0};
  std::vector<const WindowSet*> best_free;

  for (std::size_t ci = 0; ci < request.antenna_combos.size(); ++ci) {
    std::vector<const WindowSet*> member_free;
    member_free.reserve(request.antenna_combos[ci].size());
    for (const auto& antenna : request.antenna_combos[ci]) {
      member_free.push_back(&antenna_free_.at(antenna));
    }
    WindowSet candidates =
        intersect(intersect_all(member_free), request.view_periods[ci]);
    for (const TimeWindow& window : candidates.windows()) {
      if (!is_valid_candidate(window, request, member_free)) continue;
      if (window.duration() > best_window.duration()) {
        best_combo = static_cast<int>(ci);
        best_window = window;
        best_free = member_free;
      }
    }
  }
  if (best_combo < 0) return std::nullopt;

  bool left_busy = false;
  bool right_busy = false;
  if (request.setup > 0) {
    for (const WindowSet* free : best_free) {
      left_busy =
          left_busy || !free->contains({best_window.start - request.setup,
                                        best_window.start});
    }
  }
  if (request.teardown > 0) {
    for (const WindowSet* free : best_free) {
      right_busy =
          right_busy || !free->contains({best_window.end,
                                         best_window.end + request.teardown});
    }
  }

  const Seconds capacity = best_window.duration() -
                           (left_busy ? request.setup : 0) -
                           (right_busy ? request.teardown : 0);
  const Seconds on_air = std::min(want, capacity);
  const Seconds slack = capacity - on_air;
  const Seconds offset = slack > 0 ? rng_.uniform_int(0, slack) : 0;
  const Seconds start =
      best_window.start + (left_busy ? request.setup : 0) + offset;

  Allocation allocation;
  allocation.allocated = on_air;
  Track& track = allocation.track;
  track.request_id = request.request_id;
  track.combo_index = best_combo;
  track.combo = request.antenna_combos[best_combo];
  track.window = TimeWindow{start, start + on_air};
  if (request.setup > 0) {
    track.setup_window = TimeWindow{start - request.setup, start};
  }
  if (request.teardown > 0) {
    track.teardown_window = TimeWindow{start + on_air,
                                       start + on_air + request.teardown};
  }

  const TimeWindow busy{start - request.setup,
                        start + on_air + request.teardown};
  for (const auto& antenna : track.combo) {
    WindowSet& free = antenna_free_.at(antenna);
    free = subtract(free, WindowSet({busy}));
    schedule_.antenna_busy[antenna].add(busy);
  }
  return allocation;
}

void SchedEnv::rebuild_observation() {
  std::fill(observation_.begin(), observation_.end(), 0.0);
  std::set<int> missions_outstanding;
  int requests_outstanding = 0;
  double total_hours = 0.0;
  for (std::size_t i = 0; i < remaining_.size(); ++i) {
    const double hours = static_cast<double>(remaining_[i]) / 3600.0;
    observation_[3 + i] = hours;
    total_hours += hours;
    if (remaining_[i] > 0) {
      requests_outstanding += 1;
      missions_outstanding.insert(mission_of_request_[i]);
    }
  }
  observation_[0] = total_hours;
  observation_[1] = static_cast<double>(missions_outstanding.size());
  observation_[2] = static_cast<double>(requests_outstanding);
  int slot = 0;
  for (const auto& antenna : problem_->antennas) {
    observation_[3 + kMaxRequestSlots + slot] =
        static_cast<double>(antenna_free_.at(antenna.id).total_duration()) /
        3600.0;
    slot += 1;
  }
}

std::string SchedEnv::trace_csv(const std::vector<TraceRow>& rows) {
  std::string out = "step,action,masked,reward,allocated_s,combo\n";
  char buf[160];
  for (const TraceRow& row : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%d,%.10g,%" PRId64 ",",
                  row.step, row.action, row.masked ? 1 : 0, row.reward,
                  static_cast<std::int64_t>(row.allocated_seconds));
    out += buf;
    out += row.combo;
    out += '\n';
  }
  return out;
}

}  // namespace dsnsched
