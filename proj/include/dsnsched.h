/* C interface to the scheduling sandbox: problem generation, the greedy
 * allocation environment, PPO training, and evaluation/comparison reports.
 *
 * All functions return dsn_status; on failure dsn_last_error() holds a
 * thread-local description. Handles are opaque and freed with their matching
 * *_free function. NULL handles are tolerated by the free functions.
 */
#ifndef DSNSCHED_H
#define DSNSCHED_H

#include <stdint.h>

#if defined(_WIN32)
#define DSN_API __declspec(dllexport)
#else
#define DSN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dsn_status {
  DSN_OK = 0,
  DSN_ERR_INVALID_ARGUMENT = 1,
  DSN_ERR_PARSE = 2,
  DSN_ERR_VALIDATION = 3,
  DSN_ERR_CONFIG = 4,
  DSN_ERR_IO = 5,
  DSN_ERR_TRAINING = 6,
  DSN_ERR_CONTRACT = 7,
  DSN_ERR_UNKNOWN = 8
} dsn_status;

typedef struct dsn_problem dsn_problem;
typedef struct dsn_env dsn_env;
typedef struct dsn_policy dsn_policy;

DSN_API const char* dsn_version(void);
DSN_API const char* dsn_last_error(void);

/* ---- problems ---------------------------------------------------------- */

/* config_json may be NULL for defaults. When has_seed is nonzero, seed
 * replaces the config's rng seed. */
DSN_API dsn_status dsn_generate_problem(const char* config_json,
                                        uint64_t seed, int has_seed,
                                        dsn_problem** out);
DSN_API dsn_status dsn_problem_load(const char* path, dsn_problem** out);
DSN_API dsn_status dsn_problem_save(const dsn_problem* problem,
                                    const char* path);
DSN_API dsn_status dsn_problem_stats(const dsn_problem* problem,
                                     double* total_requested_hours,
                                     double* total_available_hours,
                                     int* n_requests, int* n_antennas,
                                     int* n_missions);
DSN_API void dsn_problem_free(dsn_problem* problem);

/* ---- environment ------------------------------------------------------- */

DSN_API int dsn_observation_size(void);
DSN_API int dsn_action_slots(void);

DSN_API dsn_status dsn_env_create(const dsn_problem* problem, dsn_env** out);
/* obs_out may be NULL; otherwise it receives dsn_observation_size() values. */
DSN_API dsn_status dsn_env_reset(dsn_env* env, uint64_t seed, double* obs_out);
DSN_API dsn_status dsn_env_step(dsn_env* env, int action, double* reward_out,
                                int* done_out, int64_t* allocated_seconds_out);
DSN_API dsn_status dsn_env_observation(const dsn_env* env, double* obs_out);
/* mask_out receives dsn_action_slots() bytes, 1 selectable / 0 masked. */
DSN_API dsn_status dsn_env_action_mask(const dsn_env* env, uint8_t* mask_out);
DSN_API void dsn_env_free(dsn_env* env);

/* ---- policies ---------------------------------------------------------- */

DSN_API dsn_status dsn_policy_load(const char* path, dsn_policy** out);
/* obs: dsn_observation_size() values; mask: dsn_action_slots() bytes.
 * argmax nonzero picks the highest-probability action; otherwise the action
 * is sampled with the given seed. */
DSN_API dsn_status dsn_policy_act(const dsn_policy* policy, const double* obs,
                                  const uint8_t* mask, uint64_t seed,
                                  int argmax, int* action_out);
DSN_API void dsn_policy_free(dsn_policy* policy);

/* ---- pipelines --------------------------------------------------------- */

/* Trains on the problem file, writing train_log.csv, checkpoints, and
 * train_state.bin under out_dir. config_json may be NULL for defaults.
 * Overrides apply when has_seed / total_steps > 0 / n_workers > 0. resume
 * nonzero continues from out_dir/train_state.bin when present. */
DSN_API dsn_status dsn_train(const char* problem_path, const char* config_json,
                             const char* out_dir, int resume, uint64_t seed,
                             int has_seed, int64_t total_steps, int n_workers);

/* Rolls out n_episodes and writes rollout.csv, report.json, schedule.json,
 * and schedule.csv (closest-to-mean episode) under out_dir. With
 * checkpoint_path NULL a random policy is used: masked when random_masked is
 * nonzero, otherwise the unmasked diagnostic policy. */
DSN_API dsn_status dsn_evaluate(const char* problem_path,
                                const char* checkpoint_path, int random_masked,
                                int n_episodes, uint64_t seed, int argmax,
                                int n_workers, const char* out_dir);

/* Random-baseline vs trained rollouts and the comparison document
 * (summary.txt, comparison_table.csv, histogram and per-mission CSVs). */
DSN_API dsn_status dsn_compare(const char* problem_path,
                               const char* checkpoint_path, int n_episodes,
                               uint64_t seed, int n_workers,
                               const char* out_dir);

/* Problem file to requests.csv + antennas.csv under out_dir. */
DSN_API dsn_status dsn_export_problem(const char* problem_path,
                                      const char* out_dir);
/* Schedule JSON (written by dsn_evaluate) to a flat CSV. */
DSN_API dsn_status dsn_export_schedule(const char* problem_path,
                                       const char* schedule_json_path,
                                       const char* out_csv);

#ifdef __cplusplus
}
#endif

#endif /* DSNSCHED_H */
