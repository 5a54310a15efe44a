#include "dsnsched.h"

#include <exception>
#include <filesystem>
#include <memory>
#include <new>
#include <stdexcept>
#include <string>

#include "dsnsched/checkpoint.hpp"
#include "dsnsched/env.hpp"
#include "dsnsched/errors.hpp"
#include "dsnsched/eval.hpp"
#include "dsnsched/ppo.hpp"
#include "dsnsched/problem.hpp"
#include "dsnsched/serialize.hpp"
#include "dsnsched/synth_gen.hpp"

using namespace dsnsched;

struct dsn_problem {
  std::shared_ptr<const WeekProblem> problem;
};

struct dsn_env {
  SchedEnv env;
  bool has_episode = false;
};

struct dsn_policy {
  LoadedCheckpoint checkpoint;
};

namespace {

thread_local std::string g_last_error;

void set_error(const std::string& message) { g_last_error = message; }

dsn_status to_status(std::exception_ptr error) {
  try {
    std::rethrow_exception(error);
  } catch (const ParseError& e) {
    set_error(e.what());
    return DSN_ERR_PARSE;
  } catch (const ValidationError& e) {
    set_error(e.what());
    return DSN_ERR_VALIDATION;
  } catch (const ConfigError& e) {
    set_error(e.what());
    return DSN_ERR_CONFIG;
  } catch (const IoError& e) {
    set_error(e.what());
    return DSN_ERR_IO;
  } catch (const TrainingError& e) {
    set_error(e.what());
    return DSN_ERR_TRAINING;
  } catch (const ContractError& e) {
    set_error(e.what());
    return DSN_ERR_CONTRACT;
  } catch (const std::filesystem::filesystem_error& e) {
    set_error(e.what());
    return DSN_ERR_IO;
  } catch (const std::ios_base::failure& e) {
    set_error(e.what());
    return DSN_ERR_IO;
  } catch (const std::invalid_argument& e) {
    set_error(e.what());
    return DSN_ERR_INVALID_ARGUMENT;
  } catch (const std::bad_alloc&) {
    set_error("out of memory");
    return DSN_ERR_UNKNOWN;
  } catch (const std::exception& e) {
    set_error(e.what());
    return DSN_ERR_UNKNOWN;
  } catch (...) {
    set_error("unknown error");
    return DSN_ERR_UNKNOWN;
  }
}

template <typename Fn>
dsn_status guarded(Fn&& fn) {
  try {
    return fn();
  } catch (...) {
    return to_status(std::current_exception());
  }
}

dsn_status require(bool ok, const char* message) {
  if (ok) return DSN_OK;
  set_error(message);
  return DSN_ERR_INVALID_ARGUMENT;
}

}  // namespace

extern "C" {

const char* dsn_version(void) { return "0.1.0"; }

const char* dsn_last_error(void) { return g_last_error.c_str(); }

int dsn_observation_size(void) { return kObservationSize; }

int dsn_action_slots(void) { return kMaxRequestSlots; }

dsn_status dsn_generate_problem(const char* config_json, uint64_t seed,
                                int has_seed, dsn_problem** out) {
  if (dsn_status s = require(out != nullptr, "out must not be null")) return s;
  return guarded([&] {
    SynthConfig config;
    if (config_json) config = synth_config_from_json(config_json);
    if (has_seed) config.rng_seed = seed;
    auto problem = std::make_shared<WeekProblem>(generate_week(config));
    *out = new dsn_problem{std::move(problem)};
    return DSN_OK;
  });
}

dsn_status dsn_problem_load(const char* path, dsn_problem** out) {
  if (dsn_status s = require(path && out, "path and out must not be null")) {
    return s;
  }
  return guarded([&] {
    auto problem = std::make_shared<WeekProblem>(load_problem_file(path));
    *out = new dsn_problem{std::move(problem)};
    return DSN_OK;
  });
}

dsn_status dsn_problem_save(const dsn_problem* problem, const char* path) {
  if (dsn_status s =
          require(problem && path, "problem and path must not be null")) {
    return s;
  }
  return guarded([&] {
    save_problem_file(*problem->problem, path);
    return DSN_OK;
  });
}

dsn_status dsn_problem_stats(const dsn_problem* problem,
                             double* total_requested_hours,
                             double* total_available_hours, int* n_requests,
                             int* n_antennas, int* n_missions) {
  if (dsn_status s = require(problem != nullptr, "problem must not be null")) {
    return s;
  }
  const WeekProblem& p = *problem->problem;
  if (total_requested_hours) {
    *total_requested_hours = static_cast<double>(p.total_requested()) / 3600.0;
  }
  if (total_available_hours) {
    *total_available_hours = static_cast<double>(p.total_available()) / 3600.0;
  }
  if (n_requests) *n_requests = static_cast<int>(p.requests.size());
  if (n_antennas) *n_antennas = static_cast<int>(p.antennas.size());
  if (n_missions) *n_missions = p.mission_count();
  return DSN_OK;
}

void dsn_problem_free(dsn_problem* problem) { delete problem; }

dsn_status dsn_env_create(const dsn_problem* problem, dsn_env** out) {
  if (dsn_status s =
          require(problem && out, "problem and out must not be null")) {
    return s;
  }
  return guarded([&] {
    *out = new dsn_env{SchedEnv(problem->problem), false};
    return DSN_OK;
  });
}

dsn_status dsn_env_reset(dsn_env* env, uint64_t seed, double* obs_out) {
  if (dsn_status s = require(env != nullptr, "env must not be null")) return s;
  return guarded([&] {
    Observation obs = env->env.reset(seed);
    env->has_episode = true;
    if (obs_out) {
      for (int i = 0; i < kObservationSize; ++i) obs_out[i] = obs[i];
    }
    return DSN_OK;
  });
}

dsn_status dsn_env_step(dsn_env* env, int action, double* reward_out,
                        int* done_out, int64_t* allocated_seconds_out) {
  if (dsn_status s = require(env != nullptr, "env must not be null")) return s;
  if (dsn_status s = require(env->has_episode, "reset before stepping")) {
    return s;
  }
  return guarded([&] {
    StepResult result = env->env.step(action);
    if (reward_out) *reward_out = result.reward;
    if (done_out) *done_out = result.done ? 1 : 0;
    if (allocated_seconds_out) {
      *allocated_seconds_out = result.info.allocated_seconds;
    }
    return DSN_OK;
  });
}

dsn_status dsn_env_observation(const dsn_env* env, double* obs_out) {
  if (dsn_status s =
          require(env && obs_out, "env and obs_out must not be null")) {
    return s;
  }
  return guarded([&] {
    Observation obs = env->env.observation();
    for (int i = 0; i < kObservationSize; ++i) obs_out[i] = obs[i];
    return DSN_OK;
  });
}

dsn_status dsn_env_action_mask(const dsn_env* env, uint8_t* mask_out) {
  if (dsn_status s =
          require(env && mask_out, "env and mask_out must not be null")) {
    return s;
  }
  return guarded([&] {
    std::vector<bool> mask = env->env.action_mask();
    for (int i = 0; i < kMaxRequestSlots; ++i) mask_out[i] = mask[i] ? 1 : 0;
    return DSN_OK;
  });
}

void dsn_env_free(dsn_env* env) { delete env; }

dsn_status dsn_policy_load(const char* path, dsn_policy** out) {
  if (dsn_status s = require(path && out, "path and out must not be null")) {
    return s;
  }
  return guarded([&] {
    *out = new dsn_policy{load_checkpoint(path)};
    return DSN_OK;
  });
}

dsn_status dsn_policy_act(const dsn_policy* policy, const double* obs,
                          const uint8_t* mask, uint64_t seed, int argmax,
                          int* action_out) {
  if (dsn_status s = require(policy && obs && mask && action_out,
                             "policy, obs, mask, action_out required")) {
    return s;
  }
  return guarded([&] {
    const PolicyNet<float>& net = policy->checkpoint.net;
    std::vector<double> obs_vec(obs, obs + net.obs_dim());
    std::vector<bool> mask_vec(net.n_actions());
    for (int i = 0; i < net.n_actions(); ++i) mask_vec[i] = mask[i] != 0;
    PolicyOutput<float> out = net.forward(obs_vec, mask_vec);
    if (argmax) {
      *action_out = PolicyNet<float>::argmax_action(out);
    } else {
      Rng rng(seed);
      *action_out = PolicyNet<float>::sample(out, rng).first;
    }
    return DSN_OK;
  });
}

void dsn_policy_free(dsn_policy* policy) { delete policy; }

dsn_status dsn_train(const char* problem_path, const char* config_json,
                     const char* out_dir, int resume, uint64_t seed,
                     int has_seed, int64_t total_steps, int n_workers) {
  if (dsn_status s = require(problem_path && out_dir,
                             "problem_path and out_dir must not be null")) {
    return s;
  }
  return guarded([&] {
    auto problem = std::make_shared<WeekProblem>(load_problem_file(problem_path));
    PPOConfig config;
    if (config_json) config = ppo_config_from_json(config_json);
    if (has_seed) config.seed = seed;
    if (total_steps > 0) config.total_env_steps = total_steps;
    if (n_workers > 0) config.n_workers = n_workers;
    validate_config(config);
    std::filesystem::create_directories(out_dir);
    write_text_file(std::string(out_dir) + "/ppo_config.json",
                    ppo_config_to_json(config));
    Trainer trainer(config, problem);
    trainer.run(out_dir, resume != 0);
    return DSN_OK;
  });
}

dsn_status dsn_evaluate(const char* problem_path, const char* checkpoint_path,
                        int random_masked, int n_episodes, uint64_t seed,
                        int argmax, int n_workers, const char* out_dir) {
  if (dsn_status s = require(problem_path && out_dir,
                             "problem_path and out_dir must not be null")) {
    return s;
  }
  if (dsn_status s = require(n_episodes > 0, "n_episodes must be positive")) {
    return s;
  }
  return guarded([&] {
    auto problem = std::make_shared<WeekProblem>(load_problem_file(problem_path));
    std::unique_ptr<LoadedCheckpoint> checkpoint;
    PolicyKind kind = random_masked ? PolicyKind::kRandomMasked
                                    : PolicyKind::kRandomUnmasked;
    if (checkpoint_path) {
      checkpoint = std::make_unique<LoadedCheckpoint>(
          load_checkpoint(checkpoint_path));
      kind = PolicyKind::kTrained;
    }
    RolloutResult result =
        rollout(checkpoint ? &checkpoint->net : nullptr, kind, problem,
                n_episodes, seed, argmax != 0, std::max(1, n_workers));

    std::filesystem::create_directories(out_dir);
    const std::string dir(out_dir);
    write_text_file(dir + "/rollout.csv", rollout_csv(result, *problem));
    write_text_file(dir + "/report.json", eval_report_json(result, *problem));
    const int selected = closest_to_mean_episode(result);
    const Schedule& schedule = result.episodes[selected].schedule;
    write_text_file(dir + "/schedule.json",
                    schedule_to_json(schedule, *problem));
    write_text_file(dir + "/schedule.csv", schedule_to_csv(schedule, *problem));
    return DSN_OK;
  });
}

dsn_status dsn_compare(const char* problem_path, const char* checkpoint_path,
                       int n_episodes, uint64_t seed, int n_workers,
                       const char* out_dir) {
  if (dsn_status s = require(problem_path && checkpoint_path && out_dir,
                             "problem, checkpoint, out_dir required")) {
    return s;
  }
  if (dsn_status s = require(n_episodes > 0, "n_episodes must be positive")) {
    return s;
  }
  return guarded([&] {
    auto problem = std::make_shared<WeekProblem>(load_problem_file(problem_path));
    LoadedCheckpoint checkpoint = load_checkpoint(checkpoint_path);
    const int workers = std::max(1, n_workers);
    RolloutResult random_set =
        rollout(nullptr, PolicyKind::kRandomMasked, problem, n_episodes,
                Rng::mix(seed, 1), false, workers);
    RolloutResult trained_set =
        rollout(&checkpoint.net, PolicyKind::kTrained, problem, n_episodes,
                Rng::mix(seed, 2), false, workers);
    ComparisonDoc doc = compare(random_set, trained_set, *problem);
    write_comparison(out_dir, doc);
    write_text_file(std::string(out_dir) + "/rollout_random.csv",
                    rollout_csv(random_set, *problem));
    write_text_file(std::string(out_dir) + "/rollout_trained.csv",
                    rollout_csv(trained_set, *problem));
    return DSN_OK;
  });
}

dsn_status dsn_export_problem(const char* problem_path, const char* out_dir) {
  if (dsn_status s = require(problem_path && out_dir,
                             "problem_path and out_dir must not be null")) {
    return s;
  }
  return guarded([&] {
    const WeekProblem problem = load_problem_file(problem_path);
    std::filesystem::create_directories(out_dir);

    std::string requests =
        "request_id,mission,requested_s,min_s,setup_s,teardown_s,combos\n";
    for (const TrackRequest& r : problem.requests) {
      std::string combos;
      for (std::size_t c = 0; c < r.antenna_combos.size(); ++c) {
        if (c) combos += ' ';
        for (std::size_t m = 0; m < r.antenna_combos[c].size(); ++m) {
          if (m) combos += '+';
          combos += r.antenna_combos[c][m];
        }
      }
      requests += std::to_string(r.request_id) + "," + r.mission_id + "," +
                  std::to_string(r.requested_duration) + "," +
                  std::to_string(r.min_duration) + "," +
                  std::to_string(r.setup) + "," + std::to_string(r.teardown) +
                  "," + combos + "\n";
    }
    write_text_file(std::string(out_dir) + "/requests.csv", requests);

    std::string antennas = "antenna,week_start_s,week_end_s,maintenance_s\n";
    for (const Antenna& a : problem.antennas) {
      antennas += a.id + "," + std::to_string(a.week_bounds.start) + "," +
                  std::to_string(a.week_bounds.end) + "," +
                  std::to_string(a.maintenance.total_duration()) + "\n";
    }
    write_text_file(std::string(out_dir) + "/antennas.csv", antennas);
    return DSN_OK;
  });
}

dsn_status dsn_export_schedule(const char* problem_path,
                               const char* schedule_json_path,
                               const char* out_csv) {
  if (dsn_status s = require(problem_path && schedule_json_path && out_csv,
                             "problem, schedule, out_csv required")) {
    return s;
  }
  return guarded([&] {
    const WeekProblem problem = load_problem_file(problem_path);
    const Schedule schedule =
        schedule_from_json(read_text_file(schedule_json_path));
    write_text_file(out_csv, schedule_to_csv(schedule, problem));
    return DSN_OK;
  });
}

}  // extern "C"
