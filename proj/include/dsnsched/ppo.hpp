#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dsnsched/checkpoint.hpp"
#include "dsnsched/env.hpp"
#include "dsnsched/policy_net.hpp"
#include "dsnsched/problem.hpp"

namespace dsnsched {

struct PPOConfig {
  double learning_rate = 5e-5;
  int minibatch_size = 128;
  int epochs_per_batch = 30;
  double gamma = 0.99;
  double gae_lambda = 1.0;
  double kl_target = 0.01;
  double kl_stop_factor = 4.0;  // stop epochs when kl > factor * target
  double clip_epsilon = 0.3;
  double vf_coef = 1.0;
  double ent_coef = 0.0;
  double vf_clip = 0.0;  // 0 disables value clipping
  bool normalize_advantages = true;
  int rollout_batch_size = 4000;
  long long total_env_steps = 200000;
  int eval_episodes = 20;
  bool eval_argmax = false;
  int n_streams = 4;   // logical experience streams; affects batch content
  int n_workers = 1;   // execution threads; never affects batch content
  int checkpoint_every = 1;
  std::vector<int> hidden = {256, 256};
  std::uint64_t seed = 0;
};

// Throws ConfigError on violated invariants (gamma/lambda ranges, epsilon,
// minibatch vs batch size, positive counts).
void validate_config(const PPOConfig& config);
PPOConfig ppo_config_from_json(const std::string& text);
std::string ppo_config_to_json(const PPOConfig& config);

// GAE over one contiguous segment. dones[t] marks an episode ending at step
// t; accumulation resets across it. bootstrap_value is V of the state after
// the last step, used only when the segment ends mid-episode.
struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};
GaeResult compute_gae(const std::vector<double>& rewards,
                      const std::vector<double>& values,
                      const std::vector<bool>& dones, double bootstrap_value,
                      double gamma, double lambda);

struct EvalStats {
  double reward_mean = 0.0;
  double reward_max = 0.0;
  double ep_len_mean = 0.0;
  double entropy_mean = 0.0;  // mean policy entropy over decision points
};

// Stochastic (or argmax) rollouts with action masking; deterministic given
// seed and independent of n_workers.
EvalStats evaluate_policy(const PolicyNet<float>& net,
                          std::shared_ptr<const WeekProblem> problem,
                          int n_episodes, std::uint64_t seed, bool argmax,
                          int n_workers);

// One train-log row; written as CSV and kept in memory for callers.
struct IterationStats {
  int iter = 0;
  long long env_steps = 0;
  double eval_reward_mean = 0.0;
  double eval_reward_max = 0.0;
  double eval_ep_len_mean = 0.0;
  double entropy = 0.0;
  double kl = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double lr = 0.0;
  double wallclock_s = 0.0;
};

// Experience from one collection pass: fixed-size batch in stream-major
// order, each stream a contiguous segment with its own bootstrap.
struct RolloutBatch {
  Eigen::MatrixXf obs;        // obs_dim x N
  Eigen::MatrixXf mask;       // n_actions x N, entries 0/1
  Eigen::MatrixXf old_probs;  // n_actions x N
  std::vector<int> actions;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<double> log_probs;
  std::vector<std::uint8_t> dones;  // not vector<bool>: streams fill it concurrently
  std::vector<int> segment_start;      // per stream
  std::vector<int> segment_len;        // per stream
  std::vector<double> bootstrap;       // per stream, 0 when segment ended done
  long long masked_samples = 0;        // sampled actions with mask false
};

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double kl = 0.0;
  int epochs_run = 0;
  bool kl_early_stop = false;
};

class Trainer {
 public:
  Trainer(PPOConfig config, std::shared_ptr<const WeekProblem> problem);

  // Collects exactly config.rollout_batch_size transitions, continuing
  // stream episodes from the previous call.
  RolloutBatch collect_rollouts();

  // One PPO optimization pass over the batch (epochs, minibatches, Adam,
  // KL early stop). Mutates network parameters.
  UpdateStats update(const RolloutBatch& batch);

  // Full loop: collect, GAE, update, evaluate, log, checkpoint, until
  // total_env_steps. Writes train_log.csv plus checkpoints under out_dir.
  // With resume=true continues from out_dir/train_state.bin when present.
  void run(const std::string& out_dir, bool resume = false);

  const PolicyNet<float>& net() const { return net_; }
  PolicyNet<float>& net() { return net_; }
  const PPOConfig& config() const { return config_; }
  long long env_steps() const { return env_steps_; }
  int iteration() const { return iteration_; }
  const std::vector<IterationStats>& history() const { return history_; }
  long long masked_samples_total() const { return masked_samples_total_; }

 private:
  // One experience stream. The live episode is persisted across save/load as
  // its reset tag plus the actions taken so far; the env replays them.
  struct Stream {
    std::unique_ptr<SchedEnv> env;
    Rng action_rng{0};
    Observation obs;
    bool live = false;
    std::uint64_t episodes_started = 0;
    std::vector<int> live_actions;
  };

  // Returns the count of masked actions sampled (always 0 by construction).
  long long collect_stream(int stream_id, int offset, int quota,
                           RolloutBatch& batch);
  void apply_gradients(const std::vector<float>& grad);
  void save_train_state(const std::string& path) const;
  bool load_train_state(const std::string& path);

  PPOConfig config_;
  std::shared_ptr<const WeekProblem> problem_;
  PolicyNet<float> net_;
  std::vector<Stream> streams_;
  std::vector<float> adam_m_, adam_v_;
  long long adam_t_ = 0;
  long long env_steps_ = 0;
  int iteration_ = 0;
  double best_eval_reward_ = 0.0;
  bool have_best_ = false;
  long long masked_samples_total_ = 0;
  double wallclock_resume_base_ = 0.0;
  std::vector<IterationStats> history_;
};

std::string train_log_header();
std::string train_log_row(const IterationStats& row);

}  // namespace dsnsched
