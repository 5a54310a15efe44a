#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dsnsched/problem.hpp"
#include "dsnsched/rng.hpp"

namespace dsnsched {

// Hour-denominated feature vector of fixed size kObservationSize.
using Observation = std::vector<double>;

struct StepInfo {
  Seconds allocated_seconds = 0;
  int combo_index = -1;            // -1 when nothing was placed
  std::vector<std::string> combo;  // empty when nothing was placed
  std::vector<bool> mask;          // action mask after the step
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

struct TraceRow {
  int step = 0;
  int action = 0;
  bool masked = false;  // true when the chosen index was masked out
  double reward = 0.0;
  Seconds allocated_seconds = 0;
  std::string combo;  // members joined with '+', empty when none
};

// Episodic greedy-allocation environment. The agent picks a request index;
// the environment places the longest valid candidate window for that request,
// reserving setup/teardown, and pays reward allocated/requested.
//
// Single-threaded per instance; several instances may share one read-only
// WeekProblem from different threads.
class SchedEnv {
 public:
  explicit SchedEnv(std::shared_ptr<const WeekProblem> problem);

  // Starts a fresh episode. Placement draws depend only on this seed and the
  // action sequence. Clears the trace; validity-case counters accumulate for
  // the lifetime of the instance.
  Observation reset(std::uint64_t seed);

  // Applies one action. Throws ContractError when action is outside
  // [0, max_requests) or when the episode is already done.
  StepResult step(int action);

  std::vector<bool> action_mask() const;  // length max_requests
  Observation observation() const;
  bool done() const;

  const WeekProblem& problem() const { return *problem_; }
  int n_steps() const { return n_steps_; }
  Seconds remaining(int request_id) const { return remaining_.at(request_id); }
  const std::vector<Seconds>& remaining() const { return remaining_; }
  const Schedule& schedule() const { return schedule_; }
  const std::map<std::string, WindowSet>& antenna_free() const {
    return antenna_free_;
  }
  const std::vector<TraceRow>& trace() const { return trace_; }

  // Count of validity evaluations bucketed by
  // (left flank busy)<<2 | (right flank busy)<<1 | (window >= d_min+d_s+d_t).
  const std::array<std::uint64_t, 8>& validity_cases() const {
    return validity_cases_;
  }

  static std::string trace_csv(const std::vector<TraceRow>& rows);

 private:
  struct Allocation {
    Track track;
    Seconds allocated = 0;
  };

  bool is_valid_candidate(const TimeWindow& window, const TrackRequest& request,
                          const std::vector<const WindowSet*>& member_free);
  std::optional<Allocation> allocate_request(const TrackRequest& request);
  void rebuild_observation();

  std::shared_ptr<const WeekProblem> problem_;
  std::map<std::string, WindowSet> antenna_free_;
  Schedule schedule_;
  std::vector<Seconds> remaining_;
  std::vector<int> mission_of_request_;  // dense mission index per request
  int n_missions_ = 0;
  int n_steps_ = 0;
  bool episode_live_ = false;
  Rng rng_{0};
  std::uint64_t episode_seed_ = 0;
  Observation observation_;
  std::vector<TraceRow> trace_;
  std::array<std::uint64_t, 8> validity_cases_{};
};

}  // namespace dsnsched
