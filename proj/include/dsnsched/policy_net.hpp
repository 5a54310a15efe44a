#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "dsnsched/errors.hpp"
#include "dsnsched/rng.hpp"

namespace dsnsched {

template <typename Scalar>
struct PolicyOutput {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> logits;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> masked_probs;  // exact 0 at masked
  Scalar value = 0;
};

struct LossConfig {
  double clip_epsilon = 0.3;
  double vf_coef = 1.0;
  double ent_coef = 0.0;
  double vf_clip = 0.0;  // 0 disables value clipping
};

// Scalars are means over the minibatch. total_loss is the minimized quantity:
// -surrogate + vf_coef * value_loss - ent_coef * entropy.
struct LossStats {
  double total_loss = 0.0;
  double policy_loss = 0.0;  // -surrogate
  double value_loss = 0.0;
  double entropy = 0.0;
  double kl = 0.0;  // mean KL(old || new) over the minibatch
};

// Σ p_old log(p_old / p_new); p_old == 0 terms contribute 0; p_new == 0 where
// p_old > 0 yields +infinity.
template <typename Scalar>
double kl_divergence(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& p_old,
                     const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& p_new) {
  double kl = 0.0;
  for (Eigen::Index i = 0; i < p_old.size(); ++i) {
    const double po = static_cast<double>(p_old[i]);
    if (po <= 0.0) continue;
    const double pn = static_cast<double>(p_new[i]);
    if (pn <= 0.0) return std::numeric_limits<double>::infinity();
    kl += po * (std::log(po) - std::log(pn));
  }
  return kl;
}

// Two-branch dense network: actor obs_dim -> hidden... -> n_actions logits,
// critic obs_dim -> hidden... -> 1 value. Softplus on hidden layers, linear
// heads. Parameters live in one flat vector (actor layers then critic layers,
// each W column-major then b); gradients use the same layout.
template <typename Scalar>
class PolicyNet {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  struct Batch {
    Matrix obs;     // obs_dim x B
    Matrix mask;    // n_actions x B, entries exactly 0 or 1
    std::vector<int> actions;
    Vector advantages;
    Vector returns;
    Vector old_log_probs;
    Vector old_values;
    Matrix old_probs;  // n_actions x B, for exact KL
  };

  PolicyNet(int obs_dim, std::vector<int> hidden, int n_actions,
            std::uint64_t init_seed)
      : obs_dim_(obs_dim),
        hidden_(std::move(hidden)),
        n_actions_(n_actions),
        init_seed_(init_seed) {
    if (obs_dim_ < 1 || n_actions_ < 1) {
      throw ConfigError("network dimensions must be positive");
    }
    for (int h : hidden_) {
      if (h < 1) throw ConfigError("hidden layer sizes must be positive");
    }
    build_layout();
    params_.assign(param_count_, Scalar(0));
    init_params();
  }

  int obs_dim() const { return obs_dim_; }
  int n_actions() const { return n_actions_; }
  const std::vector<int>& hidden() const { return hidden_; }
  std::uint64_t init_seed() const { return init_seed_; }
  std::size_t param_count() const { return param_count_; }
  const std::vector<Scalar>& params() const { return params_; }
  std::vector<Scalar>& params() { return params_; }

  bool params_finite() const {
    for (Scalar p : params_) {
      if (!std::isfinite(static_cast<double>(p))) return false;
    }
    return true;
  }

  // probs/logits: n_actions x B; values: B. mask entries must be 0 or 1 and
  // every column needs at least one 1.
  void forward_batch(const Matrix& obs, const Matrix& mask, Matrix* logits,
                     Matrix* probs, Vector* values) const {
    Cache cache;
    run_forward(obs, mask, cache);
    if (logits) *logits = cache.logits;
    if (probs) *probs = cache.probs;
    if (values) *values = cache.values;
  }

  PolicyOutput<Scalar> forward(const std::vector<double>& obs,
                               const std::vector<bool>& mask) const {
    if (static_cast<int>(obs.size()) != obs_dim_) {
      throw ContractError("observation size mismatch");
    }
    if (static_cast<int>(mask.size()) != n_actions_) {
      throw ContractError("mask size mismatch");
    }
    bool any = false;
    for (bool m : mask) any = any || m;
    if (!any) throw ContractError("all-false mask: episode should be done");

    Matrix x(obs_dim_, 1);
    for (int i = 0; i < obs_dim_; ++i) x(i, 0) = static_cast<Scalar>(obs[i]);
    Matrix m(n_actions_, 1);
    for (int i = 0; i < n_actions_; ++i) m(i, 0) = mask[i] ? Scalar(1) : Scalar(0);

    Cache cache;
    run_forward(x, m, cache);
    PolicyOutput<Scalar> out;
    out.logits = cache.logits.col(0);
    out.masked_probs = cache.probs.col(0);
    out.value = cache.values[0];
    return out;
  }

  // Draws from masked_probs; returns (action, log_prob). Never returns a
  // masked action.
  static std::pair<int, double> sample(const PolicyOutput<Scalar>& out,
                                       Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    int action = -1;  // when u >= final acc (rounding), keeps the last entry
    for (Eigen::Index i = 0; i < out.masked_probs.size(); ++i) {
      const double p = static_cast<double>(out.masked_probs[i]);
      if (p <= 0.0) continue;
      action = static_cast<int>(i);
      acc += p;
      if (u < acc) break;
    }
    if (action < 0) throw ContractError("sample from all-zero distribution");
    return {action, std::log(static_cast<double>(out.masked_probs[action]))};
  }

  static int argmax_action(const PolicyOutput<Scalar>& out) {
    int best = -1;
    Scalar best_p = Scalar(-1);
    for (Eigen::Index i = 0; i < out.masked_probs.size(); ++i) {
      if (out.masked_probs[i] > best_p) {
        best_p = out.masked_probs[i];
        best = static_cast<int>(i);
      }
    }
    return best;
  }

  // Composite PPO loss over the minibatch and its exact gradient (same layout
  // as params()). grad may be null to get stats only.
  LossStats loss_and_grad(const Batch& batch, const LossConfig& config,
                          std::vector<Scalar>* grad) const {
    const Eigen::Index b = batch.obs.cols();
    if (b == 0) throw ContractError("empty minibatch");
    const Scalar w = Scalar(1) / static_cast<Scalar>(b);

    Cache cache;
    run_forward(batch.obs, batch.mask, cache);

    LossStats stats;
    Matrix g_logits = Matrix::Zero(n_actions_, b);
    Vector g_values = Vector::Zero(b);

    double surrogate = 0.0, vloss = 0.0, ent_sum = 0.0, kl_sum = 0.0;
    for (Eigen::Index t = 0; t < b; ++t) {
      const int a = batch.actions[t];
      const double logp_new = new_log_prob(cache, t, a);
      const double ratio =
          std::exp(logp_new - static_cast<double>(batch.old_log_probs[t]));
      const double adv = static_cast<double>(batch.advantages[t]);
      const double lo = 1.0 - config.clip_epsilon;
      const double hi = 1.0 + config.clip_epsilon;
      const double clipped = std::clamp(ratio, lo, hi) * adv;
      const double unclipped = ratio * adv;
      surrogate += std::min(unclipped, clipped);
      // d(surrogate)/d(logp_new) = ratio*adv when the unclipped branch is
      // active (min attains it), else 0.
      const bool active = unclipped <= clipped;
      if (active) {
        const Scalar coeff = -w * static_cast<Scalar>(ratio * adv);
        g_logits.col(t) += coeff * (-cache.probs.col(t));
        g_logits(a, t) += coeff;
      }

      // Entropy of the new distribution; masked entries hold exact zeros.
      double ent = 0.0;
      for (Eigen::Index i = 0; i < n_actions_; ++i) {
        const double p = static_cast<double>(cache.probs(i, t));
        if (p > 0.0) ent -= p * std::log(p);
      }
      ent_sum += ent;
      if (config.ent_coef != 0.0) {
        // dH/dz_j = -p_j (log p_j + H); loss term is -ent_coef * mean H.
        for (Eigen::Index i = 0; i < n_actions_; ++i) {
          const double p = static_cast<double>(cache.probs(i, t));
          if (p > 0.0) {
            g_logits(i, t) += static_cast<Scalar>(config.ent_coef) * w *
                              static_cast<Scalar>(p * (std::log(p) + ent));
          }
        }
      }

      // Value loss, optionally clipped around the rollout-time value.
      const double v = static_cast<double>(cache.values[t]);
      const double ret = static_cast<double>(batch.returns[t]);
      if (config.vf_clip > 0.0) {
        const double v_old = static_cast<double>(batch.old_values[t]);
        const double delta =
            std::clamp(v - v_old, -config.vf_clip, config.vf_clip);
        const double v_clipped = v_old + delta;
        const double raw = (v - ret) * (v - ret);
        const double clip = (v_clipped - ret) * (v_clipped - ret);
        vloss += std::max(raw, clip);
        double dv;
        if (raw >= clip) {
          dv = 2.0 * (v - ret);
        } else {
          const bool pass = std::abs(v - v_old) < config.vf_clip;
          dv = pass ? 2.0 * (v_clipped - ret) : 0.0;
        }
        g_values[t] = static_cast<Scalar>(config.vf_coef * dv) * w;
      } else {
        vloss += (v - ret) * (v - ret);
        g_values[t] = static_cast<Scalar>(config.vf_coef * 2.0 * (v - ret)) * w;
      }

      if (batch.old_probs.size() > 0) {
        Vector po = batch.old_probs.col(t);
        Vector pn = cache.probs.col(t);
        kl_sum += kl_divergence<Scalar>(po, pn);
      }
    }

    stats.policy_loss = -surrogate / static_cast<double>(b);
    stats.value_loss = vloss / static_cast<double>(b);
    stats.entropy = ent_sum / static_cast<double>(b);
    stats.kl = batch.old_probs.size() > 0 ? kl_sum / static_cast<double>(b)
                                          : 0.0;
    stats.total_loss = stats.policy_loss + config.vf_coef * stats.value_loss -
                       config.ent_coef * stats.entropy;
    if (!std::isfinite(stats.total_loss)) {
      throw TrainingError("non-finite loss on minibatch of " +
                          std::to_string(b) + " transitions");
    }

    if (grad) {
      grad->assign(param_count_, Scalar(0));
      backward(batch.obs, cache, g_logits, g_values, grad->data());
    }
    return stats;
  }

 private:
  struct Cache {
    std::vector<Matrix> actor_pre, actor_act;    // per hidden layer
    std::vector<Matrix> critic_pre, critic_act;  // per hidden layer
    Matrix logits;  // n_actions x B
    Matrix probs;   // n_actions x B
    Vector values;  // B
    Vector logsumexp;  // B: log sum exp of masked logits minus colmax
    Vector colmax;     // B
  };

  static Scalar softplus(Scalar z) {
    // log(1 + e^z), overflow-safe
    if (z > Scalar(30)) return z;
    if (z < Scalar(-30)) return std::exp(z);
    return std::log(Scalar(1) + std::exp(z));
  }
  static Scalar sigmoid(Scalar z) {
    if (z >= Scalar(0)) {
      const Scalar e = std::exp(-z);
      return Scalar(1) / (Scalar(1) + e);
    }
    const Scalar e = std::exp(z);
    return e / (Scalar(1) + e);
  }

  void build_layout() {
    auto push_branch = [&](int out_final, std::vector<std::size_t>& offsets) {
      int in = obs_dim_;
      for (int h : hidden_) {
        offsets.push_back(cursor_);
        cursor_ += static_cast<std::size_t>(h) * in;  // W
        offsets.push_back(cursor_);
        cursor_ += h;  // b
        in = h;
      }
      offsets.push_back(cursor_);
      cursor_ += static_cast<std::size_t>(out_final) * in;
      offsets.push_back(cursor_);
      cursor_ += out_final;
    };
    cursor_ = 0;
    push_branch(n_actions_, actor_offsets_);
    push_branch(1, critic_offsets_);
    param_count_ = cursor_;
  }

  int layer_in(std::size_t layer) const {
    return layer == 0 ? obs_dim_ : hidden_[layer - 1];
  }
  int layer_out(std::size_t layer, int head) const {
    return layer < hidden_.size() ? hidden_[layer] : head;
  }

  Eigen::Map<const Matrix> weight(const std::vector<std::size_t>& offsets,
                                  std::size_t layer, int head) const {
    return {params_.data() + offsets[2 * layer], layer_out(layer, head),
            layer_in(layer)};
  }
  Eigen::Map<const Vector> bias(const std::vector<std::size_t>& offsets,
                                std::size_t layer, int head) const {
    return {params_.data() + offsets[2 * layer + 1], layer_out(layer, head)};
  }

  void init_params() {
    Rng rng(init_seed_);
    auto gauss = [&rng]() {
      const double u1 = 1.0 - rng.uniform();
      const double u2 = rng.uniform();
      return std::sqrt(-2.0 * std::log(u1)) *
             std::cos(2.0 * 3.14159265358979323846 * u2);
    };
    auto fill_branch = [&](const std::vector<std::size_t>& offsets, int head) {
      const std::size_t n_layers = hidden_.size() + 1;
      for (std::size_t l = 0; l < n_layers; ++l) {
        const int in = layer_in(l);
        const int out = layer_out(l, head);
        const double gain = (l + 1 == n_layers) ? 0.01 : 1.0;
        const double stddev = gain / std::sqrt(static_cast<double>(in));
        Scalar* w = params_.data() + offsets[2 * l];
        for (int i = 0; i < out * in; ++i) {
          w[i] = static_cast<Scalar>(gauss() * stddev);
        }
        // biases stay zero
      }
    };
    fill_branch(actor_offsets_, n_actions_);
    fill_branch(critic_offsets_, 1);
  }

  void run_branch(const Matrix& x, const std::vector<std::size_t>& offsets,
                  int head, std::vector<Matrix>& pre, std::vector<Matrix>& act,
                  Matrix& out) const {
    pre.clear();
    act.clear();
    const Matrix* cur = &x;
    for (std::size_t l = 0; l < hidden_.size(); ++l) {
      Matrix z = (weight(offsets, l, head) * (*cur)).colwise() +
                 bias(offsets, l, head);
      Matrix a = z.unaryExpr([](Scalar v) { return softplus(v); });
      pre.push_back(std::move(z));
      act.push_back(std::move(a));
      cur = &act.back();
    }
    const std::size_t last = hidden_.size();
    out = (weight(offsets, last, head) * (*cur)).colwise() +
          bias(offsets, last, head);
  }

  void run_forward(const Matrix& obs, const Matrix& mask, Cache& cache) const {
    if (obs.rows() != obs_dim_) throw ContractError("observation rows mismatch");
    if (mask.rows() != n_actions_ || mask.cols() != obs.cols()) {
      throw ContractError("mask shape mismatch");
    }
    run_branch(obs, actor_offsets_, n_actions_, cache.actor_pre,
               cache.actor_act, cache.logits);
    Matrix critic_out;
    run_branch(obs, critic_offsets_, 1, cache.critic_pre, cache.critic_act,
               critic_out);
    cache.values = critic_out.row(0).transpose();

    const Eigen::Index b = obs.cols();
    cache.probs.resize(n_actions_, b);
    cache.colmax.resize(b);
    cache.logsumexp.resize(b);
    for (Eigen::Index t = 0; t < b; ++t) {
      Scalar m = std::numeric_limits<Scalar>::lowest();
      bool any = false;
      for (Eigen::Index i = 0; i < n_actions_; ++i) {
        if (mask(i, t) != Scalar(0)) {
          any = true;
          m = std::max(m, cache.logits(i, t));
        }
      }
      if (!any) throw ContractError("all-false mask: episode should be done");
      Scalar sum = Scalar(0);
      for (Eigen::Index i = 0; i < n_actions_; ++i) {
        Scalar e = Scalar(0);
        if (mask(i, t) != Scalar(0)) {
          e = std::exp(cache.logits(i, t) - m);
        }
        cache.probs(i, t) = e;
        sum += e;
      }
      cache.probs.col(t) /= sum;
      cache.colmax[t] = m;
      cache.logsumexp[t] = std::log(sum);
    }
  }

  double new_log_prob(const Cache& cache, Eigen::Index t, int action) const {
    return static_cast<double>(cache.logits(action, t) - cache.colmax[t] -
                               cache.logsumexp[t]);
  }

  // g_out is dLoss/d(branch output); accumulates into grad (flat layout).
  void backward_branch(const Matrix& x, const std::vector<std::size_t>& offsets,
                       int head, const std::vector<Matrix>& pre,
                       const std::vector<Matrix>& act, const Matrix& g_out,
                       Scalar* grad) const {
    const std::size_t last = hidden_.size();
    Matrix g = g_out;
    for (std::size_t l = last + 1; l-- > 0;) {
      const Matrix& input = (l == 0) ? x : act[l - 1];
      const int out = layer_out(l, head);
      const int in = layer_in(l);
      Eigen::Map<Matrix> gw(grad + offsets[2 * l], out, in);
      Eigen::Map<Vector> gb(grad + offsets[2 * l + 1], out);
      gw.noalias() += g * input.transpose();
      gb += g.rowwise().sum();
      if (l == 0) break;
      Matrix g_in = weight(offsets, l, head).transpose() * g;
      g = g_in.array() *
          pre[l - 1].unaryExpr([](Scalar v) { return sigmoid(v); }).array();
    }
  }

  void backward(const Matrix& obs, const Cache& cache, const Matrix& g_logits,
                const Vector& g_values, Scalar* grad) const {
    backward_branch(obs, actor_offsets_, n_actions_, cache.actor_pre,
                    cache.actor_act, g_logits, grad);
    Matrix g_v(1, g_values.size());
    g_v.row(0) = g_values.transpose();
    backward_branch(obs, critic_offsets_, 1, cache.critic_pre,
                    cache.critic_act, g_v, grad);
  }

  int obs_dim_;
  std::vector<int> hidden_;
  int n_actions_;
  std::uint64_t init_seed_;
  std::size_t cursor_ = 0;
  std::size_t param_count_ = 0;
  std::vector<std::size_t> actor_offsets_;   // W,b per layer
  std::vector<std::size_t> critic_offsets_;  // W,b per layer
  std::vector<Scalar> params_;
};

}  // namespace dsnsched
