#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "dsnsched/errors.hpp"
#include "dsnsched/ppo.hpp"
#include "dsnsched/rng.hpp"
#include "dsnsched/synth_gen.hpp"

using namespace dsnsched;

namespace {

// Quadratic-time reference: advantage t is the (gamma*lambda)-weighted sum of
// TD residuals up to the episode boundary.
GaeResult gae_reference(const std::vector<double>& rewards,
                        const std::vector<double>& values,
                        const std::vector<bool>& dones, double bootstrap,
                        double gamma, double lambda) {
  const std::size_t n = rewards.size();
  GaeResult out;
  out.advantages.resize(n);
  out.returns.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    double sum = 0.0, w = 1.0;
    for (std::size_t k = t; k < n; ++k) {
      const double next =
          dones[k] ? 0.0 : (k + 1 < n ? values[k + 1] : bootstrap);
      sum += w * (rewards[k] + gamma * next - values[k]);
      if (dones[k]) break;
      w *= gamma * lambda;
    }
    out.advantages[t] = sum;
    out.returns[t] = sum + values[t];
  }
  return out;
}

std::shared_ptr<const WeekProblem> small_problem() {
  SynthConfig config;
  config.n_antennas = 2;
  config.n_missions = 3;
  config.n_requests = 8;
  config.total_requested_hours = 30.0;
  config.maintenance_hours_per_day = 2.0;
  config.rng_seed = 11;
  return std::make_shared<const WeekProblem>(generate_week(config));
}

PPOConfig small_config() {
  PPOConfig c;
  c.hidden = {16};
  c.rollout_batch_size = 64;
  c.minibatch_size = 32;
  c.epochs_per_batch = 3;
  c.eval_episodes = 3;
  c.total_env_steps = 128;
  c.n_streams = 4;
  c.seed = 5;
  return c;
}

bool same_batch(const RolloutBatch& a, const RolloutBatch& b) {
  return (a.obs.array() == b.obs.array()).all() &&
         (a.mask.array() == b.mask.array()).all() &&
         (a.old_probs.array() == b.old_probs.array()).all() &&
         a.actions == b.actions && a.rewards == b.rewards &&
         a.values == b.values && a.log_probs == b.log_probs &&
         a.dones == b.dones && a.segment_start == b.segment_start &&
         a.segment_len == b.segment_len && a.bootstrap == b.bootstrap;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Drop the wallclock column, the one legitimately run-dependent field.
std::string strip_last_column(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) {
    out += line.substr(0, line.rfind(','));
    out += '\n';
  }
  return out;
}

std::filesystem::path fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("gae hand-computed values") {
  // Three undiscounted-critic steps ending an episode.
  GaeResult g = compute_gae({1, 1, 1}, {0, 0, 0}, {false, false, true}, 0.0,
                            0.99, 1.0);
  CHECK(g.advantages[2] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(g.advantages[1] == doctest::Approx(1.99).epsilon(1e-15));
  CHECK(g.advantages[0] == doctest::Approx(2.9701).epsilon(1e-15));
  CHECK(g.returns[0] == doctest::Approx(2.9701).epsilon(1e-15));

  // lambda = 0 collapses to one-step TD residuals.
  GaeResult td = compute_gae({1.0, 2.0}, {0.5, 0.25}, {false, false}, 0.75,
                             0.9, 0.0);
  CHECK(td.advantages[0] == doctest::Approx(1.0 + 0.9 * 0.25 - 0.5).epsilon(1e-15));
  CHECK(td.advantages[1] == doctest::Approx(2.0 + 0.9 * 0.75 - 0.25).epsilon(1e-15));

  // A perfect critic earns zero advantage at any lambda.
  const double gamma = 0.95;
  std::vector<double> r = {0.5, 0.25, 0.125};
  std::vector<double> v(3);
  v[2] = r[2];
  v[1] = r[1] + gamma * v[2];
  v[0] = r[0] + gamma * v[1];
  for (double lambda : {0.0, 0.5, 1.0}) {
    GaeResult perfect =
        compute_gae(r, v, {false, false, true}, 0.0, gamma, lambda);
    for (int t = 0; t < 3; ++t) {
      CHECK(perfect.advantages[t] == doctest::Approx(0.0).epsilon(1e-12));
      CHECK(perfect.returns[t] == doctest::Approx(v[t]).epsilon(1e-12));
    }
  }

  // gamma = lambda = 1 with a zero critic: suffix sums per episode.
  GaeResult suffix = compute_gae({1, 2, 3, 4}, {0, 0, 0, 0},
                                 {false, true, false, true}, 0.0, 1.0, 1.0);
  CHECK(suffix.advantages == std::vector<double>{3, 2, 7, 4});

  // The bootstrap value only matters when the segment ends mid-episode.
  GaeResult boot = compute_gae({2.0}, {0.5}, {false}, 1.5, 0.9, 1.0);
  CHECK(boot.advantages[0] == doctest::Approx(2.0 + 0.9 * 1.5 - 0.5).epsilon(1e-15));
  GaeResult no_boot = compute_gae({2.0}, {0.5}, {true}, 1.5, 0.9, 1.0);
  CHECK(no_boot.advantages[0] == doctest::Approx(1.5).epsilon(1e-15));

  CHECK_THROWS_AS(compute_gae({1.0}, {1.0, 2.0}, {false}, 0.0, 0.9, 1.0),
                  ContractError);
}

TEST_CASE("gae matches the quadratic reference on random segments") {
  Rng rng(2024);
  for (int iter = 0; iter < 300; ++iter) {
    const int n = static_cast<int>(rng.uniform_int(1, 40));
    std::vector<double> rewards(n), values(n);
    std::vector<bool> dones(n);
    for (int t = 0; t < n; ++t) {
      rewards[t] = rng.uniform(-1.0, 1.0);
      values[t] = rng.uniform(-1.0, 1.0);
      dones[t] = rng.uniform() < 0.2;
    }
    const double bootstrap = rng.uniform(-1.0, 1.0);
    const double gamma = rng.uniform(0.5, 1.0);
    const double lambda = rng.uniform(0.0, 1.0);

    GaeResult fast = compute_gae(rewards, values, dones, bootstrap, gamma, lambda);
    GaeResult slow = gae_reference(rewards, values, dones, bootstrap, gamma, lambda);
    for (int t = 0; t < n; ++t) {
      CHECK(fast.advantages[t] == doctest::Approx(slow.advantages[t]).epsilon(1e-12));
      CHECK(fast.returns[t] == doctest::Approx(slow.returns[t]).epsilon(1e-12));
    }
  }
}

TEST_CASE("config validation rejects out-of-range values") {
  auto rejected = [](auto mutate) {
    PPOConfig c;
    mutate(c);
    CHECK_THROWS_AS(validate_config(c), ConfigError);
  };
  CHECK_NOTHROW(validate_config(PPOConfig{}));
  rejected([](PPOConfig& c) { c.learning_rate = 0.0; });
  rejected([](PPOConfig& c) { c.minibatch_size = 0; });
  rejected([](PPOConfig& c) { c.epochs_per_batch = 0; });
  rejected([](PPOConfig& c) { c.gamma = 0.0; });
  rejected([](PPOConfig& c) { c.gamma = 1.01; });
  rejected([](PPOConfig& c) { c.gae_lambda = -0.1; });
  rejected([](PPOConfig& c) { c.gae_lambda = 1.1; });
  rejected([](PPOConfig& c) { c.kl_target = 0.0; });
  rejected([](PPOConfig& c) { c.kl_stop_factor = 0.0; });
  rejected([](PPOConfig& c) { c.clip_epsilon = 0.0; });
  rejected([](PPOConfig& c) { c.vf_coef = -1.0; });
  rejected([](PPOConfig& c) { c.ent_coef = -1.0; });
  rejected([](PPOConfig& c) { c.vf_clip = -1.0; });
  rejected([](PPOConfig& c) { c.rollout_batch_size = 0; });
  rejected([](PPOConfig& c) { c.minibatch_size = c.rollout_batch_size + 1; });
  rejected([](PPOConfig& c) { c.total_env_steps = 0; });
  rejected([](PPOConfig& c) { c.eval_episodes = 0; });
  rejected([](PPOConfig& c) { c.n_streams = 0; });
  rejected([](PPOConfig& c) { c.rollout_batch_size = 2; c.n_streams = 3; c.minibatch_size = 1; });
  rejected([](PPOConfig& c) { c.n_workers = 0; });
  rejected([](PPOConfig& c) { c.checkpoint_every = 0; });
  rejected([](PPOConfig& c) { c.hidden = {}; });
  rejected([](PPOConfig& c) { c.hidden = {64, 0}; });
}

TEST_CASE("trainer config JSON round-trips") {
  PPOConfig c = small_config();
  c.ent_coef = 0.005;
  c.vf_clip = 0.2;
  c.eval_argmax = true;
  std::string text = ppo_config_to_json(c);
  PPOConfig back = ppo_config_from_json(text);
  CHECK(ppo_config_to_json(back) == text);
  CHECK(back.hidden == std::vector<int>{16});
  CHECK(back.eval_argmax);

  PPOConfig partial = ppo_config_from_json(R"({"gamma": 0.5})");
  CHECK(partial.gamma == 0.5);
  CHECK(partial.minibatch_size == PPOConfig{}.minibatch_size);

  CHECK_THROWS_AS(ppo_config_from_json("nope"), ParseError);
  CHECK_THROWS_AS(ppo_config_from_json(R"({"gamma": "high"})"), ParseError);
  CHECK_THROWS_AS(ppo_config_from_json(R"({"gamma": 2.0})"), ConfigError);
}

TEST_CASE("trainer constructor contracts") {
  CHECK_THROWS_AS(Trainer(small_config(), nullptr), ContractError);
  PPOConfig bad = small_config();
  bad.gamma = 0.0;
  CHECK_THROWS_AS(Trainer(bad, small_problem()), ConfigError);
}

TEST_CASE("rollout collection is deterministic and worker-independent") {
  auto problem = small_problem();

  Trainer a(small_config(), problem);
  Trainer b(small_config(), problem);
  PPOConfig threaded = small_config();
  threaded.n_workers = 3;
  Trainer c(threaded, problem);

  RolloutBatch ba = a.collect_rollouts();
  RolloutBatch bb = b.collect_rollouts();
  RolloutBatch bc = c.collect_rollouts();
  CHECK(same_batch(ba, bb));
  CHECK(same_batch(ba, bc));

  CHECK(ba.masked_samples == 0);
  CHECK(a.masked_samples_total() == 0);
  CHECK(a.env_steps() == 64);

  int total = 0;
  for (std::size_t s = 0; s < ba.segment_len.size(); ++s) {
    total += ba.segment_len[s];
    const int last = ba.segment_start[s] + ba.segment_len[s] - 1;
    if (ba.dones[last]) CHECK(ba.bootstrap[s] == 0.0);
  }
  CHECK(total == 64);
  REQUIRE(ba.segment_len.size() == 4);
  for (int len : ba.segment_len) CHECK(len == 16);

  // Rewards only come from real allocations, and the mask matches obs slots.
  for (int t = 0; t < 64; ++t) {
    CHECK(ba.rewards[t] >= 0.0);
    CHECK(ba.rewards[t] <= 1.0);
    for (int i = 0; i < kMaxRequestSlots; ++i) {
      const bool live = ba.mask(i, t) != 0.0f;
      const bool has_time = ba.obs(3 + i, t) > 0.0f;
      CHECK(live == has_time);
    }
  }

  // A second collection continues the streams rather than repeating.
  RolloutBatch second = a.collect_rollouts();
  CHECK(!same_batch(ba, second));
  CHECK(a.env_steps() == 128);
}

TEST_CASE("updates are deterministic and keep parameters finite") {
  auto problem = small_problem();
  Trainer a(small_config(), problem);
  Trainer b(small_config(), problem);

  const std::vector<float> before = a.net().params();
  RolloutBatch ba = a.collect_rollouts();
  RolloutBatch bb = b.collect_rollouts();
  UpdateStats ua = a.update(ba);
  UpdateStats ub = b.update(bb);

  CHECK(a.net().params() == b.net().params());
  CHECK(a.net().params() != before);
  CHECK(a.net().params_finite());
  CHECK(ua.epochs_run >= 1);
  CHECK(ua.epochs_run <= small_config().epochs_per_batch);
  CHECK(ua.kl == ub.kl);
  CHECK(ua.kl >= 0.0);
  if (ua.kl_early_stop) {
    CHECK(ua.kl > 4.0 * 0.01);
  }

  PPOConfig raw = small_config();
  raw.normalize_advantages = false;
  Trainer c(raw, problem);
  RolloutBatch bc = c.collect_rollouts();
  c.update(bc);
  CHECK(c.net().params_finite());
}

TEST_CASE("evaluation is deterministic and worker-independent") {
  auto problem = small_problem();
  Trainer t(small_config(), problem);

  EvalStats a = evaluate_policy(t.net(), problem, 5, 99, false, 1);
  EvalStats b = evaluate_policy(t.net(), problem, 5, 99, false, 1);
  EvalStats c = evaluate_policy(t.net(), problem, 5, 99, false, 3);
  CHECK(a.reward_mean == b.reward_mean);
  CHECK(a.reward_mean == c.reward_mean);
  CHECK(a.reward_max == c.reward_max);
  CHECK(a.ep_len_mean == c.ep_len_mean);
  CHECK(a.entropy_mean == c.entropy_mean);
  CHECK(a.reward_max >= a.reward_mean);
  CHECK(a.ep_len_mean >= 1.0);
  CHECK(a.entropy_mean > 0.0);

  EvalStats greedy = evaluate_policy(t.net(), problem, 5, 99, true, 1);
  CHECK(greedy.reward_mean > 0.0);

  CHECK_THROWS_AS(evaluate_policy(t.net(), problem, 0, 99, false, 1),
                  ContractError);
}

TEST_CASE("train log formatting") {
  CHECK(train_log_header() ==
        "iter,env_steps,eval_reward_mean,eval_reward_max,eval_ep_len_mean,"
        "entropy,kl,policy_loss,value_loss,lr,wallclock_s\n");
  IterationStats row;
  row.iter = 3;
  row.env_steps = 12000;
  row.eval_reward_mean = 12.345678;
  row.eval_reward_max = 13.0;
  row.eval_ep_len_mean = 28.5;
  row.entropy = 4.25;
  row.kl = 0.0123;
  row.policy_loss = -0.001;
  row.value_loss = 2.5;
  row.lr = 5e-05;
  row.wallclock_s = 12.3456;
  CHECK(train_log_row(row) ==
        "3,12000,12.345678,13,28.5,4.25,0.0123,-0.001,2.5,5e-05,12.346\n");
}

TEST_CASE("run writes logs and checkpoints, resume matches a straight run") {
  namespace fs = std::filesystem;
  auto problem = small_problem();

  // Two iterations of 64 steps each.
  auto dir_a = fresh_dir("dsnsched_run_a");
  {
    Trainer t(small_config(), problem);
    t.run(dir_a.string());
    CHECK(t.iteration() == 2);
    CHECK(t.env_steps() == 128);
    CHECK(t.history().size() == 2);
  }
  CHECK(fs::exists(dir_a / "train_log.csv"));
  CHECK(fs::exists(dir_a / "checkpoint_00001.ckpt"));
  CHECK(fs::exists(dir_a / "checkpoint_00002.ckpt"));
  CHECK(fs::exists(dir_a / "checkpoint_latest.ckpt"));
  CHECK(fs::exists(dir_a / "checkpoint_best.ckpt"));
  CHECK(fs::exists(dir_a / "train_state.bin"));

  std::string log_a = read_file((dir_a / "train_log.csv").string());
  {
    std::istringstream in(log_a);
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) ++lines;
    CHECK(lines == 3);  // header + 2 rows
  }

  // Stop at 128, extend to 192 via resume; compare to an unbroken 192 run.
  auto dir_b = fresh_dir("dsnsched_run_b");
  {
    Trainer t(small_config(), problem);
    t.run(dir_b.string());
  }
  std::vector<float> resumed_params;
  {
    PPOConfig extended = small_config();
    extended.total_env_steps = 192;
    Trainer t(extended, problem);
    t.run(dir_b.string(), true);
    CHECK(t.iteration() == 3);
    CHECK(t.env_steps() == 192);
    resumed_params = t.net().params();
  }
  auto dir_c = fresh_dir("dsnsched_run_c");
  std::vector<float> straight_params;
  {
    PPOConfig extended = small_config();
    extended.total_env_steps = 192;
    Trainer t(extended, problem);
    t.run(dir_c.string());
    straight_params = t.net().params();
  }
  CHECK(resumed_params == straight_params);
  CHECK(strip_last_column(read_file((dir_b / "train_log.csv").string())) ==
        strip_last_column(read_file((dir_c / "train_log.csv").string())));
  CHECK(read_file((dir_b / "checkpoint_latest.ckpt").string()) ==
        read_file((dir_c / "checkpoint_latest.ckpt").string()));

  // Resuming under a different recipe is refused.
  {
    PPOConfig different = small_config();
    different.total_env_steps = 256;
    different.gamma = 0.9;
    Trainer t(different, problem);
    CHECK_THROWS_AS(t.run(dir_b.string(), true), ConfigError);
  }

  // A different worker count is execution detail, not recipe; the resumed
  // run still lines up.
  auto dir_d = fresh_dir("dsnsched_run_d");
  {
    PPOConfig threaded = small_config();
    threaded.n_workers = 3;
    threaded.total_env_steps = 192;
    Trainer t(threaded, problem);
    t.run(dir_d.string());
    CHECK(t.net().params() == straight_params);
  }
  CHECK(strip_last_column(read_file((dir_d / "train_log.csv").string())) ==
        strip_last_column(read_file((dir_c / "train_log.csv").string())));

  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  fs::remove_all(dir_c);
  fs::remove_all(dir_d);
}
