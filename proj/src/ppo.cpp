#include "dsnsched/ppo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "dsnsched/errors.hpp"
#include "dsnsched/parallel.hpp"
#include "dsnsched/serialize.hpp"

namespace dsnsched {

using json = nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kNetSalt = 0x6e657477ULL;     // network init
constexpr std::uint64_t kEnvSalt = 0x656e7673ULL;     // episode seeds
constexpr std::uint64_t kActionSalt = 0x61637274ULL;  // action sampling
constexpr std::uint64_t kUpdateSalt = 0x75706474ULL;  // minibatch shuffling
constexpr std::uint64_t kEvalSalt = 0x6576616cULL;    // evaluation episodes

double entropy_of(const Eigen::VectorXf& probs) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    const double p = probs[i];
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

}  // namespace

void validate_config(const PPOConfig& c) {
  auto bad = [](const std::string& msg) { throw ConfigError(msg); };
  if (c.learning_rate <= 0) bad("learning_rate must be positive");
  if (c.minibatch_size < 1) bad("minibatch_size must be positive");
  if (c.epochs_per_batch < 1) bad("epochs_per_batch must be positive");
  if (c.gamma <= 0 || c.gamma > 1) bad("gamma must be in (0, 1]");
  if (c.gae_lambda < 0 || c.gae_lambda > 1) bad("gae_lambda must be in [0, 1]");
  if (c.kl_target <= 0) bad("kl_target must be positive");
  if (c.kl_stop_factor <= 0) bad("kl_stop_factor must be positive");
  if (c.clip_epsilon <= 0) bad("clip_epsilon must be positive");
  if (c.vf_coef < 0) bad("vf_coef must be nonnegative");
  if (c.ent_coef < 0) bad("ent_coef must be nonnegative");
  if (c.vf_clip < 0) bad("vf_clip must be nonnegative");
  if (c.rollout_batch_size < 1) bad("rollout_batch_size must be positive");
  if (c.minibatch_size > c.rollout_batch_size) {
    bad("minibatch_size must not exceed rollout_batch_size");
  }
  if (c.total_env_steps < 1) bad("total_env_steps must be positive");
  if (c.eval_episodes < 1) bad("eval_episodes must be positive");
  if (c.n_streams < 1) bad("n_streams must be positive");
  if (c.rollout_batch_size < c.n_streams) {
    bad("rollout_batch_size must be at least n_streams");
  }
  if (c.n_workers < 1) bad("n_workers must be positive");
  if (c.checkpoint_every < 1) bad("checkpoint_every must be positive");
  if (c.hidden.empty()) bad("hidden layer list must not be empty");
  for (int h : c.hidden) {
    if (h < 1) bad("hidden layer sizes must be positive");
  }
}

std::string ppo_config_to_json(const PPOConfig& c) {
  json doc;
  doc["learning_rate"] = c.learning_rate;
  doc["minibatch_size"] = c.minibatch_size;
  doc["epochs_per_batch"] = c.epochs_per_batch;
  doc["gamma"] = c.gamma;
  doc["gae_lambda"] = c.gae_lambda;
  doc["kl_target"] = c.kl_target;
  doc["kl_stop_factor"] = c.kl_stop_factor;
  doc["clip_epsilon"] = c.clip_epsilon;
  doc["vf_coef"] = c.vf_coef;
  doc["ent_coef"] = c.ent_coef;
  doc["vf_clip"] = c.vf_clip;
  doc["normalize_advantages"] = c.normalize_advantages;
  doc["rollout_batch_size"] = c.rollout_batch_size;
  doc["total_env_steps"] = c.total_env_steps;
  doc["eval_episodes"] = c.eval_episodes;
  doc["eval_argmax"] = c.eval_argmax;
  doc["n_streams"] = c.n_streams;
  doc["n_workers"] = c.n_workers;
  doc["checkpoint_every"] = c.checkpoint_every;
  doc["hidden"] = c.hidden;
  doc["seed"] = c.seed;
  return doc.dump(2) + "\n";
}

PPOConfig ppo_config_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("trainer config is not valid JSON: ") +
                     e.what());
  }
  PPOConfig c;
  try {
    auto get = [&doc](const char* key, auto& field) {
      if (doc.contains(key)) field = doc[key].get<std::decay_t<decltype(field)>>();
    };
    get("learning_rate", c.learning_rate);
    get("minibatch_size", c.minibatch_size);
    get("epochs_per_batch", c.epochs_per_batch);
    get("gamma", c.gamma);
    get("gae_lambda", c.gae_lambda);
    get("kl_target", c.kl_target);
    get("kl_stop_factor", c.kl_stop_factor);
    get("clip_epsilon", c.clip_epsilon);
    get("vf_coef", c.vf_coef);
    get("ent_coef", c.ent_coef);
    get("vf_clip", c.vf_clip);
    get("normalize_advantages", c.normalize_advantages);
    get("rollout_batch_size", c.rollout_batch_size);
    get("total_env_steps", c.total_env_steps);
    get("eval_episodes", c.eval_episodes);
    get("eval_argmax", c.eval_argmax);
    get("n_streams", c.n_streams);
    get("n_workers", c.n_workers);
    get("checkpoint_every", c.checkpoint_every);
    get("hidden", c.hidden);
    get("seed", c.seed);
  } catch (const json::exception& e) {
    throw ParseError(std::string("trainer config field has wrong type: ") +
                     e.what());
  }
  validate_config(c);
  return c;
}

GaeResult compute_gae(const std::vector<double>& rewards,
                      const std::vector<double>& values,
                      const std::vector<bool>& dones, double bootstrap_value,
                      double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) {
    throw ContractError("GAE input lengths differ");
  }
  GaeResult out;
  out.advantages.resize(n);
  out.returns.resize(n);
  double acc = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double next_value =
        dones[t] ? 0.0 : (t + 1 < n ? values[t + 1] : bootstrap_value);
    const double delta = rewards[t] + gamma * next_value - values[t];
    acc = dones[t] ? delta : delta + gamma * lambda * acc;
    out.advantages[t] = acc;
    out.returns[t] = acc + values[t];
  }
  return out;
}

EvalStats evaluate_policy(const PolicyNet<float>& net,
                          std::shared_ptr<const WeekProblem> problem,
                          int n_episodes, std::uint64_t seed, bool argmax,
                          int n_workers) {
  if (n_episodes < 1) throw ContractError("evaluate_policy needs episodes");
  std::vector<double> rewards(n_episodes, 0.0);
  std::vector<double> lengths(n_episodes, 0.0);
  std::vector<double> entropy_sums(n_episodes, 0.0);

  run_indexed(n_episodes, n_workers, [&](int ep) {
    SchedEnv env(problem);
    Observation obs = env.reset(Rng::mix(seed, 2 * ep));
    Rng action_rng(Rng::mix(seed, 2 * ep + 1));
    double total = 0.0;
    double ent = 0.0;
    int len = 0;
    while (!env.done()) {
      const std::vector<bool> mask = env.action_mask();
      PolicyOutput<float> out = net.forward(obs, mask);
      ent += entropy_of(out.masked_probs);
      int action;
      if (argmax) {
        action = PolicyNet<float>::argmax_action(out);
      } else {
        action = PolicyNet<float>::sample(out, action_rng).first;
      }
      if (!mask[action]) {
        throw ContractError("evaluation sampled a masked action");
      }
      StepResult sr = env.step(action);
      total += sr.reward;
      len += 1;
      obs = std::move(sr.observation);
    }
    rewards[ep] = total;
    lengths[ep] = len;
    entropy_sums[ep] = ent;
  });

  EvalStats stats;
  double steps = 0.0, ent_total = 0.0;
  stats.reward_max = rewards[0];
  for (int ep = 0; ep < n_episodes; ++ep) {
    stats.reward_mean += rewards[ep];
    stats.reward_max = std::max(stats.reward_max, rewards[ep]);
    stats.ep_len_mean += lengths[ep];
    steps += lengths[ep];
    ent_total += entropy_sums[ep];
  }
  stats.reward_mean /= n_episodes;
  stats.ep_len_mean /= n_episodes;
  stats.entropy_mean = steps > 0 ? ent_total / steps : 0.0;
  return stats;
}

Trainer::Trainer(PPOConfig config, std::shared_ptr<const WeekProblem> problem)
    : config_(std::move(config)),
      problem_(std::move(problem)),
      net_(kObservationSize, config_.hidden, kMaxRequestSlots,
           Rng::mix(config_.seed, kNetSalt)) {
  validate_config(config_);
  if (!problem_) throw ContractError("Trainer requires a problem");
  validate_problem(*problem_);
  streams_.resize(config_.n_streams);
  for (int s = 0; s < config_.n_streams; ++s) {
    streams_[s].action_rng =
        Rng(Rng::mix(config_.seed ^ kActionSalt, static_cast<std::uint64_t>(s)));
  }
  adam_m_.assign(net_.param_count(), 0.0f);
  adam_v_.assign(net_.param_count(), 0.0f);
}

long long Trainer::collect_stream(int stream_id, int offset, int quota,
                                  RolloutBatch& batch) {
  Stream& st = streams_[stream_id];
  if (!st.env) st.env = std::make_unique<SchedEnv>(problem_);
  auto next_episode = [&] {
    const std::uint64_t tag =
        (static_cast<std::uint64_t>(stream_id) << 40) + st.episodes_started;
    st.obs = st.env->reset(Rng::mix(config_.seed ^ kEnvSalt, tag));
    st.episodes_started += 1;
    st.live = true;
    st.live_actions.clear();
  };
  if (!st.live) next_episode();

  long long masked_here = 0;
  for (int i = 0; i < quota; ++i) {
    const int col = offset + i;
    const std::vector<bool> mask = st.env->action_mask();
    PolicyOutput<float> out = net_.forward(st.obs, mask);
    auto [action, log_prob] = PolicyNet<float>::sample(out, st.action_rng);
    if (!mask[action]) masked_here += 1;

    for (int r = 0; r < kObservationSize; ++r) {
      batch.obs(r, col) = static_cast<float>(st.obs[r]);
    }
    for (int r = 0; r < kMaxRequestSlots; ++r) {
      batch.mask(r, col) = mask[r] ? 1.0f : 0.0f;
    }
    batch.old_probs.col(col) = out.masked_probs;
    batch.actions[col] = action;
    batch.values[col] = out.value;
    batch.log_probs[col] = log_prob;

    StepResult sr = st.env->step(action);
    st.live_actions.push_back(action);
    batch.rewards[col] = sr.reward;
    batch.dones[col] = sr.done ? 1 : 0;
    st.obs = std::move(sr.observation);
    if (sr.done) next_episode();
  }
  batch.segment_start[stream_id] = offset;
  batch.segment_len[stream_id] = quota;
  if (quota > 0 && batch.dones[offset + quota - 1]) {
    batch.bootstrap[stream_id] = 0.0;
  } else if (quota > 0) {
    batch.bootstrap[stream_id] =
        net_.forward(st.obs, st.env->action_mask()).value;
  } else {
    batch.bootstrap[stream_id] = 0.0;
  }
  return masked_here;
}

RolloutBatch Trainer::collect_rollouts() {
  const int n = config_.rollout_batch_size;
  const int s = config_.n_streams;
  RolloutBatch batch;
  batch.obs.resize(kObservationSize, n);
  batch.mask.resize(kMaxRequestSlots, n);
  batch.old_probs.resize(kMaxRequestSlots, n);
  batch.actions.assign(n, 0);
  batch.rewards.assign(n, 0.0);
  batch.values.assign(n, 0.0);
  batch.log_probs.assign(n, 0.0);
  batch.dones.assign(n, 0);
  batch.segment_start.assign(s, 0);
  batch.segment_len.assign(s, 0);
  batch.bootstrap.assign(s, 0.0);

  std::vector<int> offsets(s, 0), quotas(s, 0);
  const int base = n / s;
  const int rem = n % s;
  int cursor = 0;
  for (int k = 0; k < s; ++k) {
    offsets[k] = cursor;
    quotas[k] = base + (k < rem ? 1 : 0);
    cursor += quotas[k];
  }

  std::vector<long long> masked(s, 0);
  run_indexed(s, config_.n_workers, [&](int k) {
    masked[k] = collect_stream(k, offsets[k], quotas[k], batch);
  });
  for (long long m : masked) batch.masked_samples += m;

  env_steps_ += n;
  masked_samples_total_ += batch.masked_samples;
  return batch;
}

void Trainer::apply_gradients(const std::vector<float>& grad) {
  adam_t_ += 1;
  const float b1 = 0.9f, b2 = 0.999f, eps = 1e-8f;
  const float bc1 =
      1.0f - static_cast<float>(std::pow(0.9, static_cast<double>(adam_t_)));
  const float bc2 =
      1.0f - static_cast<float>(std::pow(0.999, static_cast<double>(adam_t_)));
  const float lr = static_cast<float>(config_.learning_rate);
  const auto n = static_cast<Eigen::Index>(net_.param_count());
  Eigen::Map<Eigen::ArrayXf> p(net_.params().data(), n);
  Eigen::Map<Eigen::ArrayXf> m(adam_m_.data(), n);
  Eigen::Map<Eigen::ArrayXf> v(adam_v_.data(), n);
  Eigen::Map<const Eigen::ArrayXf> g(grad.data(), n);
  m = b1 * m + (1.0f - b1) * g;
  v = b2 * v + (1.0f - b2) * g.square();
  p -= lr * (m / bc1) / ((v / bc2).sqrt() + eps);
}

UpdateStats Trainer::update(const RolloutBatch& batch) {
  const int n = static_cast<int>(batch.actions.size());
  if (n == 0) throw ContractError("empty rollout batch");

  std::vector<double> advantages(n, 0.0), returns(n, 0.0);
  for (std::size_t seg = 0; seg < batch.segment_start.size(); ++seg) {
    const int start = batch.segment_start[seg];
    const int len = batch.segment_len[seg];
    if (len == 0) continue;
    std::vector<double> r(batch.rewards.begin() + start,
                          batch.rewards.begin() + start + len);
    std::vector<double> v(batch.values.begin() + start,
                          batch.values.begin() + start + len);
    std::vector<bool> d(batch.dones.begin() + start,
                        batch.dones.begin() + start + len);
    GaeResult gae = compute_gae(r, v, d, batch.bootstrap[seg], config_.gamma,
                                config_.gae_lambda);
    std::copy(gae.advantages.begin(), gae.advantages.end(),
              advantages.begin() + start);
    std::copy(gae.returns.begin(), gae.returns.end(), returns.begin() + start);
  }

  if (config_.normalize_advantages) {
    double mean = 0.0;
    for (double a : advantages) mean += a;
    mean /= n;
    double var = 0.0;
    for (double a : advantages) var += (a - mean) * (a - mean);
    var /= n;
    const double denom = std::sqrt(var) + 1e-8;
    for (double& a : advantages) a = (a - mean) / denom;
  }

  PolicyNet<float>::Batch full;
  full.obs = batch.obs;
  full.mask = batch.mask;
  full.old_probs = batch.old_probs;
  full.actions = batch.actions;
  full.advantages.resize(n);
  full.returns.resize(n);
  full.old_log_probs.resize(n);
  full.old_values.resize(n);
  for (int i = 0; i < n; ++i) {
    full.advantages[i] = static_cast<float>(advantages[i]);
    full.returns[i] = static_cast<float>(returns[i]);
    full.old_log_probs[i] = static_cast<float>(batch.log_probs[i]);
    full.old_values[i] = static_cast<float>(batch.values[i]);
  }

  LossConfig loss_config;
  loss_config.clip_epsilon = config_.clip_epsilon;
  loss_config.vf_coef = config_.vf_coef;
  loss_config.ent_coef = config_.ent_coef;
  loss_config.vf_clip = config_.vf_clip;

  Rng shuffle_rng(
      Rng::mix(config_.seed ^ kUpdateSalt,
               static_cast<std::uint64_t>(iteration_)));
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;

  UpdateStats stats;
  std::vector<float> grad;
  PolicyNet<float>::Batch sub;
  for (int epoch = 0; epoch < config_.epochs_per_batch; ++epoch) {
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(shuffle_rng.uniform_int(0, i));
      std::swap(perm[i], perm[j]);
    }
    double kl_sum = 0.0, ploss_sum = 0.0, vloss_sum = 0.0;
    for (int start = 0; start < n; start += config_.minibatch_size) {
      const int b = std::min(config_.minibatch_size, n - start);
      sub.obs.resize(kObservationSize, b);
      sub.mask.resize(kMaxRequestSlots, b);
      sub.old_probs.resize(kMaxRequestSlots, b);
      sub.actions.resize(b);
      sub.advantages.resize(b);
      sub.returns.resize(b);
      sub.old_log_probs.resize(b);
      sub.old_values.resize(b);
      for (int j = 0; j < b; ++j) {
        const int src = perm[start + j];
        sub.obs.col(j) = full.obs.col(src);
        sub.mask.col(j) = full.mask.col(src);
        sub.old_probs.col(j) = full.old_probs.col(src);
        sub.actions[j] = full.actions[src];
        sub.advantages[j] = full.advantages[src];
        sub.returns[j] = full.returns[src];
        sub.old_log_probs[j] = full.old_log_probs[src];
        sub.old_values[j] = full.old_values[src];
      }
      LossStats ls = net_.loss_and_grad(sub, loss_config, &grad);
      apply_gradients(grad);
      if (!net_.params_finite()) {
        throw TrainingError("non-finite parameters after update at iteration " +
                            std::to_string(iteration_));
      }
      kl_sum += ls.kl * b;
      ploss_sum += ls.policy_loss * b;
      vloss_sum += ls.value_loss * b;
    }
    stats.kl = kl_sum / n;
    stats.policy_loss = ploss_sum / n;
    stats.value_loss = vloss_sum / n;
    stats.epochs_run = epoch + 1;
    if (stats.kl > config_.kl_stop_factor * config_.kl_target) {
      stats.kl_early_stop = true;
      break;
    }
  }
  return stats;
}

std::string train_log_header() {
  return "iter,env_steps,eval_reward_mean,eval_reward_max,eval_ep_len_mean,"
         "entropy,kl,policy_loss,value_loss,lr,wallclock_s\n";
}

std::string train_log_row(const IterationStats& r) {
  char buf[352];
  std::snprintf(buf, sizeof(buf),
                "%d,%lld,%.8g,%.8g,%.8g,%.8g,%.8g,%.8g,%.8g,%.8g,%.3f\n",
                r.iter, r.env_steps, r.eval_reward_mean, r.eval_reward_max,
                r.eval_ep_len_mean, r.entropy, r.kl, r.policy_loss,
                r.value_loss, r.lr, r.wallclock_s);
  return buf;
}

namespace {
constexpr char kStateMagic[] = "dsnsched-trainstate\n";
constexpr std::size_t kStateMagicLen = sizeof(kStateMagic) - 1;

void write_floats(std::ofstream& out, const std::vector<float>& data) {
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));
}
void read_floats(std::ifstream& in, std::vector<float>& data) {
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(data.size() * sizeof(float)));
}

template <typename T>
void write_pod(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(value));
}
template <typename T>
T read_pod(std::ifstream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(value));
  return value;
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}
}  // namespace

void Trainer::save_train_state(const std::string& path) const {
  json doc;
  doc["version"] = 1;
  doc["config"] = ppo_config_to_json(config_);
  doc["problem_fnv64"] = fnv1a64(problem_to_json(*problem_));
  doc["iteration"] = iteration_;
  doc["env_steps"] = env_steps_;
  doc["adam_t"] = adam_t_;
  doc["best_eval_reward"] = best_eval_reward_;
  doc["have_best"] = have_best_;
  doc["masked_samples_total"] = masked_samples_total_;
  doc["wallclock_s"] =
      history_.empty() ? 0.0 : history_.back().wallclock_s;
  doc["param_count"] = net_.param_count();
  const std::string header = doc.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write train state: " + path);
  out.write(kStateMagic, static_cast<std::streamsize>(kStateMagicLen));
  const std::uint64_t len = header.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  write_floats(out, net_.params());
  write_floats(out, adam_m_);
  write_floats(out, adam_v_);

  // Collector state, so a resumed run replays exactly where this one stops:
  // per stream, the episode counter, the live episode's actions, and the
  // action RNG engine.
  write_pod(out, static_cast<std::uint32_t>(streams_.size()));
  for (const Stream& st : streams_) {
    write_pod(out, st.episodes_started);
    write_pod(out, static_cast<std::uint8_t>(st.live ? 1 : 0));
    write_pod(out, static_cast<std::uint32_t>(st.live_actions.size()));
    out.write(reinterpret_cast<const char*>(st.live_actions.data()),
              static_cast<std::streamsize>(st.live_actions.size() *
                                           sizeof(int)));
    const std::string rng_text = st.action_rng.state();
    write_pod(out, static_cast<std::uint64_t>(rng_text.size()));
    out.write(rng_text.data(), static_cast<std::streamsize>(rng_text.size()));
  }
  if (!out) throw IoError("short write on train state: " + path);
}

bool Trainer::load_train_state(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  char magic[kStateMagicLen];
  in.read(magic, static_cast<std::streamsize>(kStateMagicLen));
  if (!in || std::memcmp(magic, kStateMagic, kStateMagicLen) != 0) {
    throw ParseError("not a train-state file: " + path);
  }
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || len > (1u << 20)) throw ParseError("corrupt train state: " + path);
  std::string header(len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(len));
  if (!in) throw ParseError("truncated train state: " + path);

  json doc;
  try {
    doc = json::parse(header);
  } catch (const json::exception& e) {
    throw ParseError(std::string("train-state metadata invalid: ") + e.what());
  }
  if (doc.at("version") != 1) {
    throw ConfigError("unsupported train-state version");
  }
  // The run may legitimately extend total_env_steps; everything else that
  // shapes the computation must match.
  PPOConfig saved = ppo_config_from_json(doc.at("config"));
  PPOConfig current = config_;
  saved.total_env_steps = current.total_env_steps = 0;
  saved.n_workers = current.n_workers = 0;
  if (ppo_config_to_json(saved) != ppo_config_to_json(current)) {
    throw ConfigError("resume config does not match saved training state");
  }
  if (doc.at("param_count") != net_.param_count()) {
    throw ConfigError("train-state parameter count mismatch");
  }
  if (doc.contains("problem_fnv64") &&
      doc.at("problem_fnv64") != fnv1a64(problem_to_json(*problem_))) {
    throw ConfigError("resume problem does not match saved training state");
  }

  iteration_ = doc.at("iteration");
  env_steps_ = doc.at("env_steps");
  adam_t_ = doc.at("adam_t");
  best_eval_reward_ = doc.at("best_eval_reward");
  have_best_ = doc.at("have_best");
  masked_samples_total_ = doc.at("masked_samples_total");
  wallclock_resume_base_ = doc.at("wallclock_s");

  read_floats(in, net_.params());
  read_floats(in, adam_m_);
  read_floats(in, adam_v_);
  if (!in) throw ParseError("truncated train-state parameters: " + path);

  const auto n_streams = read_pod<std::uint32_t>(in);
  if (!in || n_streams != streams_.size()) {
    throw ParseError("train-state stream count mismatch: " + path);
  }
  for (std::size_t s = 0; s < streams_.size(); ++s) {
    Stream& st = streams_[s];
    st.episodes_started = read_pod<std::uint64_t>(in);
    const bool live = read_pod<std::uint8_t>(in) != 0;
    const auto n_actions = read_pod<std::uint32_t>(in);
    if (!in || n_actions > 2u * kMaxRequestSlots) {
      throw ParseError("corrupt train-state stream record: " + path);
    }
    st.live_actions.resize(n_actions);
    in.read(reinterpret_cast<char*>(st.live_actions.data()),
            static_cast<std::streamsize>(n_actions * sizeof(int)));
    const auto rng_len = read_pod<std::uint64_t>(in);
    if (!in || rng_len > (1u << 16)) {
      throw ParseError("corrupt train-state stream record: " + path);
    }
    std::string rng_text(rng_len, '\0');
    in.read(rng_text.data(), static_cast<std::streamsize>(rng_len));
    if (!in) throw ParseError("truncated train-state streams: " + path);
    st.action_rng.set_state(rng_text);

    st.env.reset();
    st.live = false;
    if (live) {
      if (st.episodes_started == 0) {
        throw ParseError("corrupt train-state stream record: " + path);
      }
      const std::uint64_t tag = (static_cast<std::uint64_t>(s) << 40) +
                                (st.episodes_started - 1);
      st.env = std::make_unique<SchedEnv>(problem_);
      st.obs = st.env->reset(Rng::mix(config_.seed ^ kEnvSalt, tag));
      for (int action : st.live_actions) {
        StepResult sr = st.env->step(action);
        if (sr.done) {
          throw ParseError("train-state live episode replays to done: " + path);
        }
        st.obs = std::move(sr.observation);
      }
      st.live = true;
    }
  }
  return true;
}

void Trainer::run(const std::string& out_dir, bool resume) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const std::string state_path = out_dir + "/train_state.bin";
  const std::string log_path = out_dir + "/train_log.csv";

  bool resumed = false;
  if (resume) resumed = load_train_state(state_path);
  if (!resumed) wallclock_resume_base_ = 0.0;

  std::ofstream log(log_path, resumed && fs::exists(log_path)
                                  ? std::ios::app
                                  : std::ios::trunc);
  if (!log) throw IoError("cannot write train log: " + log_path);
  if (!resumed || fs::file_size(log_path) == 0) log << train_log_header();
  log.flush();

  const auto t0 = std::chrono::steady_clock::now();
  while (env_steps_ < config_.total_env_steps) {
    iteration_ += 1;
    RolloutBatch batch = collect_rollouts();
    UpdateStats ustats = update(batch);
    EvalStats estats = evaluate_policy(
        net_, problem_, config_.eval_episodes,
        Rng::mix(config_.seed ^ kEvalSalt,
                 static_cast<std::uint64_t>(iteration_)),
        config_.eval_argmax, config_.n_workers);

    IterationStats row;
    row.iter = iteration_;
    row.env_steps = env_steps_;
    row.eval_reward_mean = estats.reward_mean;
    row.eval_reward_max = estats.reward_max;
    row.eval_ep_len_mean = estats.ep_len_mean;
    row.entropy = estats.entropy_mean;
    row.kl = ustats.kl;
    row.policy_loss = ustats.policy_loss;
    row.value_loss = ustats.value_loss;
    row.lr = config_.learning_rate;
    row.wallclock_s =
        wallclock_resume_base_ +
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    history_.push_back(row);
    log << train_log_row(row);
    log.flush();

    CheckpointMeta meta;
    meta.obs_dim = net_.obs_dim();
    meta.hidden = net_.hidden();
    meta.n_actions = net_.n_actions();
    meta.init_seed = net_.init_seed();
    meta.env_steps = env_steps_;
    meta.iteration = iteration_;
    meta.eval_reward_mean = estats.reward_mean;

    if (iteration_ % config_.checkpoint_every == 0) {
      char name[64];
      std::snprintf(name, sizeof(name), "/checkpoint_%05d.ckpt", iteration_);
      save_checkpoint(out_dir + name, net_, meta);
    }
    save_checkpoint(out_dir + "/checkpoint_latest.ckpt", net_, meta);
    if (!have_best_ || estats.reward_mean > best_eval_reward_) {
      have_best_ = true;
      best_eval_reward_ = estats.reward_mean;
      save_checkpoint(out_dir + "/checkpoint_best.ckpt", net_, meta);
    }
    save_train_state(state_path);
  }
}

}  // namespace dsnsched
