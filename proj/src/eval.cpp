#include "dsnsched/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>

#include <json.hpp>

#include "dsnsched/env.hpp"
#include "dsnsched/errors.hpp"
#include "dsnsched/parallel.hpp"
#include "dsnsched/rng.hpp"
#include "dsnsched/serialize.hpp"

namespace dsnsched {

using json = nlohmann::ordered_json;

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

std::vector<Seconds> allocated_per_request(const Schedule& schedule,
                                           const WeekProblem& problem) {
  std::vector<Seconds> allocated(problem.requests.size(), 0);
  for (const Track& track : schedule.tracks) {
    allocated[track.request_id] += track.window.duration();
  }
  return allocated;
}

std::string histogram_csv(const std::vector<double>& values, double lo,
                          double hi, int bins) {
  if (hi <= lo) hi = lo + 1.0;
  const double width = (hi - lo) / bins;
  std::vector<long long> counts(bins, 0);
  for (double v : values) {
    int idx = static_cast<int>(std::floor((v - lo) / width));
    idx = std::clamp(idx, 0, bins - 1);
    counts[idx] += 1;
  }
  std::string out = "bin_lo,bin_hi,count\n";
  for (int i = 0; i < bins; ++i) {
    out += fmt("%.10g", lo + i * width);
    out += ',';
    out += fmt("%.10g", lo + (i + 1) * width);
    out += ',';
    out += std::to_string(counts[i]);
    out += '\n';
  }
  return out;
}

std::string action_histogram_csv(const RolloutResult& result,
                                 int max_requests) {
  std::vector<long long> counts(max_requests, 0);
  for (const EpisodeResult& ep : result.episodes) {
    for (int a : ep.actions) counts[a] += 1;
  }
  std::string out = "bin_lo,bin_hi,count\n";
  for (int i = 0; i < max_requests; ++i) {
    out += std::to_string(i);
    out += ',';
    out += std::to_string(i + 1);
    out += ',';
    out += std::to_string(counts[i]);
    out += '\n';
  }
  return out;
}

}  // namespace

RolloutResult rollout(const PolicyNet<float>* net, PolicyKind kind,
                      std::shared_ptr<const WeekProblem> problem,
                      int n_episodes, std::uint64_t seed, bool argmax,
                      int n_workers) {
  if (n_episodes < 1) throw ContractError("rollout needs at least 1 episode");
  if (kind == PolicyKind::kTrained) {
    if (!net) throw ConfigError("trained rollout requires a checkpoint");
    if (net->obs_dim() != kObservationSize ||
        net->n_actions() != kMaxRequestSlots) {
      throw ConfigError("checkpoint shape does not match the environment");
    }
  }

  RolloutResult result;
  result.episodes.resize(n_episodes);
  run_indexed(n_episodes, n_workers, [&](int ep) {
    SchedEnv env(problem);
    Observation obs = env.reset(Rng::mix(seed, 2 * ep));
    Rng action_rng(Rng::mix(seed, 2 * ep + 1));
    EpisodeResult& out = result.episodes[ep];
    while (!env.done()) {
      const std::vector<bool> mask = env.action_mask();
      int action = -1;
      switch (kind) {
        case PolicyKind::kTrained: {
          PolicyOutput<float> po = net->forward(obs, mask);
          action = argmax ? PolicyNet<float>::argmax_action(po)
                          : PolicyNet<float>::sample(po, action_rng).first;
          break;
        }
        case PolicyKind::kRandomMasked: {
          std::vector<int> live;
          live.reserve(mask.size());
          for (std::size_t i = 0; i < mask.size(); ++i) {
            if (mask[i]) live.push_back(static_cast<int>(i));
          }
          action = live[action_rng.uniform_int(
              0, static_cast<std::int64_t>(live.size()) - 1)];
          break;
        }
        case PolicyKind::kRandomUnmasked: {
          action = static_cast<int>(
              action_rng.uniform_int(0, problem->max_requests - 1));
          break;
        }
      }
      if (kind != PolicyKind::kRandomUnmasked && !mask[action]) {
        throw ContractError("masked policy chose a masked action");
      }
      StepResult sr = env.step(action);
      out.actions.push_back(action);
      out.total_reward += sr.reward;
      out.length += 1;
      obs = std::move(sr.observation);
    }
    out.schedule = env.schedule();
    out.remaining = env.remaining();
  });

  result.reward_max = result.episodes[0].total_reward;
  for (const EpisodeResult& ep : result.episodes) {
    result.reward_mean += ep.total_reward;
    result.reward_max = std::max(result.reward_max, ep.total_reward);
  }
  result.reward_mean /= n_episodes;
  return result;
}

std::vector<MissionStats> mission_stats(const Schedule& schedule,
                                        const WeekProblem& problem) {
  const std::vector<Seconds> allocated =
      allocated_per_request(schedule, problem);
  std::vector<MissionStats> missions;
  std::map<std::string, std::size_t> index;
  for (const TrackRequest& request : problem.requests) {
    auto [it, inserted] = index.emplace(request.mission_id, missions.size());
    if (inserted) {
      missions.push_back(MissionStats{request.mission_id, 0, 0, 0.0});
    }
    MissionStats& m = missions[it->second];
    m.requested += request.requested_duration;
    m.scheduled += allocated[request.request_id];
  }
  std::erase_if(missions, [](const MissionStats& m) { return m.requested == 0; });
  for (MissionStats& m : missions) {
    m.unsatisfied = static_cast<double>(m.requested - m.scheduled) /
                    static_cast<double>(m.requested);
  }
  return missions;
}

double u_rms(const std::vector<MissionStats>& missions) {
  if (missions.empty()) return 0.0;
  double sum = 0.0;
  for (const MissionStats& m : missions) {
    sum += m.unsatisfied * m.unsatisfied;
  }
  return std::sqrt(sum / static_cast<double>(missions.size()));
}

double u_max(const std::vector<MissionStats>& missions) {
  double best = 0.0;
  for (const MissionStats& m : missions) best = std::max(best, m.unsatisfied);
  return best;
}

double antenna_utilization(const Schedule& schedule,
                           const WeekProblem& problem) {
  Seconds busy = 0;
  for (const auto& [antenna, windows] : schedule.antenna_busy) {
    busy += windows.total_duration();
  }
  const Seconds available = problem.total_available();
  if (available <= 0) {
    throw ConfigError("antenna utilization undefined: zero available time");
  }
  return static_cast<double>(busy) / static_cast<double>(available);
}

ScheduleReport build_report(const Schedule& schedule,
                            const WeekProblem& problem) {
  ScheduleReport report;
  report.missions = mission_stats(schedule, problem);
  report.u_rms = u_rms(report.missions);
  report.u_max = u_max(report.missions);
  report.antenna_utilization = antenna_utilization(schedule, problem);

  Seconds scheduled_total = 0;
  double satisfied_fraction_sum = 0.0;
  for (const MissionStats& m : report.missions) {
    scheduled_total += m.scheduled;
    satisfied_fraction_sum += 1.0 - m.unsatisfied;
  }
  report.hours_satisfied = static_cast<double>(scheduled_total) / 3600.0;
  report.mean_satisfied_time_fraction =
      report.missions.empty()
          ? 0.0
          : satisfied_fraction_sum / static_cast<double>(report.missions.size());

  const std::vector<Seconds> allocated =
      allocated_per_request(schedule, problem);
  for (const TrackRequest& request : problem.requests) {
    if (allocated[request.request_id] >= request.requested_duration) {
      report.satisfied_requests += 1;
    }
  }
  report.satisfied_request_fraction =
      problem.requests.empty()
          ? 0.0
          : static_cast<double>(report.satisfied_requests) /
                static_cast<double>(problem.requests.size());
  return report;
}

int closest_to_mean_episode(const RolloutResult& result) {
  if (result.episodes.empty()) throw ContractError("empty rollout set");
  int best = 0;
  double best_gap = std::abs(result.episodes[0].total_reward -
                             result.reward_mean);
  for (std::size_t i = 1; i < result.episodes.size(); ++i) {
    const double gap =
        std::abs(result.episodes[i].total_reward - result.reward_mean);
    if (gap < best_gap) {
      best_gap = gap;
      best = static_cast<int>(i);
    }
  }
  return best;
}

std::string comparison_table_csv(const ScheduleReport& random_report,
                                 const ScheduleReport& trained_report) {
  std::string out = "metric,random,trained\n";
  auto row = [&out](const std::string& name, const std::string& a,
                    const std::string& b) {
    out += name + "," + a + "," + b + "\n";
  };
  row("hours satisfied", fmt("%.6g", random_report.hours_satisfied),
      fmt("%.6g", trained_report.hours_satisfied));
  row("mean satisfied time fraction (%)",
      fmt("%.6g", 100.0 * random_report.mean_satisfied_time_fraction),
      fmt("%.6g", 100.0 * trained_report.mean_satisfied_time_fraction));
  row("satisfied requests", std::to_string(random_report.satisfied_requests),
      std::to_string(trained_report.satisfied_requests));
  row("mean satisfied request fraction (%)",
      fmt("%.6g", 100.0 * random_report.satisfied_request_fraction),
      fmt("%.6g", 100.0 * trained_report.satisfied_request_fraction));
  row("U_RMS (%)", fmt("%.6g", 100.0 * random_report.u_rms),
      fmt("%.6g", 100.0 * trained_report.u_rms));
  return out;
}

std::string missions_csv(const std::vector<MissionStats>& missions) {
  std::string out = "mission,requested_h,scheduled_h,U_i\n";
  for (const MissionStats& m : missions) {
    out += m.mission_id;
    out += ',';
    out += fmt("%.10g", static_cast<double>(m.requested) / 3600.0);
    out += ',';
    out += fmt("%.10g", static_cast<double>(m.scheduled) / 3600.0);
    out += ',';
    out += fmt("%.10g", m.unsatisfied);
    out += '\n';
  }
  return out;
}

ComparisonDoc compare(const RolloutResult& random_set,
                      const RolloutResult& trained_set,
                      const WeekProblem& problem, int reward_bins) {
  if (random_set.episodes.empty() || trained_set.episodes.empty()) {
    throw ContractError("compare needs non-empty rollout sets");
  }
  if (reward_bins < 1) throw ContractError("compare needs at least one bin");

  ComparisonDoc doc;
  doc.random_episode = closest_to_mean_episode(random_set);
  doc.trained_episode = closest_to_mean_episode(trained_set);
  doc.random_report = build_report(
      random_set.episodes[doc.random_episode].schedule, problem);
  doc.trained_report = build_report(
      trained_set.episodes[doc.trained_episode].schedule, problem);
  doc.table_csv = comparison_table_csv(doc.random_report, doc.trained_report);

  std::vector<double> random_rewards, trained_rewards;
  for (const EpisodeResult& ep : random_set.episodes) {
    random_rewards.push_back(ep.total_reward);
  }
  for (const EpisodeResult& ep : trained_set.episodes) {
    trained_rewards.push_back(ep.total_reward);
  }
  double lo = random_rewards[0], hi = random_rewards[0];
  for (double v : random_rewards) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  for (double v : trained_rewards) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  doc.reward_hist_random_csv =
      histogram_csv(random_rewards, lo, hi, reward_bins);
  doc.reward_hist_trained_csv =
      histogram_csv(trained_rewards, lo, hi, reward_bins);
  doc.action_hist_random_csv =
      action_histogram_csv(random_set, problem.max_requests);
  doc.action_hist_trained_csv =
      action_histogram_csv(trained_set, problem.max_requests);
  doc.missions_random_csv = missions_csv(doc.random_report.missions);
  doc.missions_trained_csv = missions_csv(doc.trained_report.missions);

  std::string text;
  text += "schedule comparison: " + problem.week_label + "\n";
  text += "random:  " + std::to_string(random_set.episodes.size()) +
          " episodes, mean reward " + fmt("%.6g", random_set.reward_mean) +
          ", selected episode " + std::to_string(doc.random_episode) +
          " (reward " +
          fmt("%.6g", random_set.episodes[doc.random_episode].total_reward) +
          ")\n";
  text += "trained: " + std::to_string(trained_set.episodes.size()) +
          " episodes, mean reward " + fmt("%.6g", trained_set.reward_mean) +
          ", selected episode " + std::to_string(doc.trained_episode) +
          " (reward " +
          fmt("%.6g", trained_set.episodes[doc.trained_episode].total_reward) +
          ")\n";
  text += "\n" + doc.table_csv;
  text += "\nantenna utilization (%): random " +
          fmt("%.6g", 100.0 * doc.random_report.antenna_utilization) +
          ", trained " +
          fmt("%.6g", 100.0 * doc.trained_report.antenna_utilization) + "\n";
  text += "U_max (%): random " + fmt("%.6g", 100.0 * doc.random_report.u_max) +
          ", trained " + fmt("%.6g", 100.0 * doc.trained_report.u_max) + "\n";
  doc.summary_text = text;
  return doc;
}

void write_comparison(const std::string& dir, const ComparisonDoc& doc) {
  std::filesystem::create_directories(dir);
  write_text_file(dir + "/summary.txt", doc.summary_text);
  write_text_file(dir + "/comparison_table.csv", doc.table_csv);
  write_text_file(dir + "/reward_hist_random.csv", doc.reward_hist_random_csv);
  write_text_file(dir + "/reward_hist_trained.csv",
                  doc.reward_hist_trained_csv);
  write_text_file(dir + "/action_hist_random.csv", doc.action_hist_random_csv);
  write_text_file(dir + "/action_hist_trained.csv",
                  doc.action_hist_trained_csv);
  write_text_file(dir + "/missions_random.csv", doc.missions_random_csv);
  write_text_file(dir + "/missions_trained.csv", doc.missions_trained_csv);
}

std::string rollout_csv(const RolloutResult& result,
                        const WeekProblem& problem) {
  std::string out = "episode,total_reward,length,satisfied_requests,"
                    "hours_satisfied\n";
  for (std::size_t ep = 0; ep < result.episodes.size(); ++ep) {
    const EpisodeResult& e = result.episodes[ep];
    int satisfied = 0;
    Seconds scheduled = 0;
    for (std::size_t i = 0; i < e.remaining.size(); ++i) {
      if (e.remaining[i] == 0) satisfied += 1;
      scheduled += problem.requests[i].requested_duration - e.remaining[i];
    }
    out += std::to_string(ep);
    out += ',';
    out += fmt("%.10g", e.total_reward);
    out += ',';
    out += std::to_string(e.length);
    out += ',';
    out += std::to_string(satisfied);
    out += ',';
    out += fmt("%.10g", static_cast<double>(scheduled) / 3600.0);
    out += '\n';
  }
  return out;
}

std::string eval_report_json(const RolloutResult& result,
                             const WeekProblem& problem) {
  const int selected = closest_to_mean_episode(result);
  const ScheduleReport report =
      build_report(result.episodes[selected].schedule, problem);
  json doc;
  doc["week_label"] = problem.week_label;
  doc["episodes"] = result.episodes.size();
  doc["reward_mean"] = result.reward_mean;
  doc["reward_max"] = result.reward_max;
  doc["selected_episode"] = selected;
  json rep;
  rep["hours_satisfied"] = report.hours_satisfied;
  rep["mean_satisfied_time_fraction"] = report.mean_satisfied_time_fraction;
  rep["satisfied_requests"] = report.satisfied_requests;
  rep["satisfied_request_fraction"] = report.satisfied_request_fraction;
  rep["u_rms"] = report.u_rms;
  rep["u_max"] = report.u_max;
  rep["antenna_utilization"] = report.antenna_utilization;
  json missions = json::array();
  for (const MissionStats& m : report.missions) {
    json entry;
    entry["mission"] = m.mission_id;
    entry["requested_s"] = m.requested;
    entry["scheduled_s"] = m.scheduled;
    entry["unsatisfied"] = m.unsatisfied;
    missions.push_back(entry);
  }
  rep["missions"] = missions;
  doc["report"] = rep;
  return doc.dump(2) + "\n";
}

}  // namespace dsnsched
