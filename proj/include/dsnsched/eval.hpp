#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dsnsched/policy_net.hpp"
#include "dsnsched/problem.hpp"

namespace dsnsched {

struct MissionStats {
  std::string mission_id;
  Seconds requested = 0;     // summed over the mission's requests
  Seconds scheduled = 0;     // on-air seconds only
  double unsatisfied = 0.0;  // (requested - scheduled) / requested
};

struct ScheduleReport {
  double hours_satisfied = 0.0;
  double mean_satisfied_time_fraction = 0.0;  // mean over missions of 1 - U_i
  int satisfied_requests = 0;                 // fully allocated requests
  double satisfied_request_fraction = 0.0;    // satisfied / total requests
  double u_rms = 0.0;
  double u_max = 0.0;
  double antenna_utilization = 0.0;
  std::vector<MissionStats> missions;
};

struct EpisodeResult {
  double total_reward = 0.0;
  int length = 0;
  Schedule schedule;
  std::vector<int> actions;
  std::vector<Seconds> remaining;  // per request at episode end
};

struct RolloutResult {
  std::vector<EpisodeResult> episodes;
  double reward_mean = 0.0;
  double reward_max = 0.0;
};

enum class PolicyKind {
  kTrained,         // sample (or argmax) from the network
  kRandomMasked,    // uniform over unmasked request indices
  kRandomUnmasked,  // diagnostic: uniform over all action slots
};

// Complete episodes with per-episode schedules and action logs. net may be
// null for the random kinds. Deterministic given seed, independent of
// n_workers. argmax applies to kTrained only.
RolloutResult rollout(const PolicyNet<float>* net, PolicyKind kind,
                      std::shared_ptr<const WeekProblem> problem,
                      int n_episodes, std::uint64_t seed, bool argmax,
                      int n_workers);

// Per-mission unsatisfied fractions. Missions with zero requested time would
// be excluded; problem validation makes them impossible in practice.
std::vector<MissionStats> mission_stats(const Schedule& schedule,
                                        const WeekProblem& problem);
double u_rms(const std::vector<MissionStats>& missions);
double u_max(const std::vector<MissionStats>& missions);

// Busy time (setup + on-air + teardown) over non-maintenance antenna time.
// Throws ConfigError when the problem has zero available time.
double antenna_utilization(const Schedule& schedule,
                           const WeekProblem& problem);

ScheduleReport build_report(const Schedule& schedule,
                            const WeekProblem& problem);

// Index of the episode whose total reward is closest to the set's mean
// (ties toward the lower index). Throws ContractError on an empty set.
int closest_to_mean_episode(const RolloutResult& result);

// Five-row comparison table, `metric,random,trained`, values via %.6g.
std::string comparison_table_csv(const ScheduleReport& random_report,
                                 const ScheduleReport& trained_report);

struct ComparisonDoc {
  int random_episode = 0;
  int trained_episode = 0;
  ScheduleReport random_report;
  ScheduleReport trained_report;
  std::string summary_text;
  std::string table_csv;
  std::string reward_hist_random_csv;
  std::string reward_hist_trained_csv;
  std::string action_hist_random_csv;
  std::string action_hist_trained_csv;
  std::string missions_random_csv;
  std::string missions_trained_csv;
};

ComparisonDoc compare(const RolloutResult& random_set,
                      const RolloutResult& trained_set,
                      const WeekProblem& problem, int reward_bins = 20);

// Writes every ComparisonDoc artifact under dir with fixed file names.
void write_comparison(const std::string& dir, const ComparisonDoc& doc);

// `episode,total_reward,length,satisfied_requests,hours_satisfied` rows.
std::string rollout_csv(const RolloutResult& result,
                        const WeekProblem& problem);

// Aggregate report JSON for one rollout set: reward stats plus the full
// ScheduleReport of the closest-to-mean episode. Canonical bytes.
std::string eval_report_json(const RolloutResult& result,
                             const WeekProblem& problem);

std::string missions_csv(const std::vector<MissionStats>& missions);

}  // namespace dsnsched
