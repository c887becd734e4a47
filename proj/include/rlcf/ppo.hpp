#ifndef RLCF_PPO_HPP
#define RLCF_PPO_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rlcf/eval.hpp"
#include "rlcf/optimizer.hpp"
#include "rlcf/parallel.hpp"
#include "rlcf/policy.hpp"
#include "rlcf/reward.hpp"
#include "rlcf/task.hpp"

namespace rlcf::ppo {

using policy::PolicyParams;
using policy::Trajectory;

struct PpoConfig {
  double gamma = 1.0;
  double beta = 0.1;
  double epsilon = 0.2;
  double alpha = 0.001;
  int top_k = 5;
  int num_samples = 3;
  int ppo_epochs = 1;
  int epochs = 6;
  int max_len = 40;
  LrConfig lr{};
  double weight_decay = 0.05;
  bool sum_over_time = false;
  reward::RewardTerms terms{};
  std::uint64_t seed = 1;

  /// Every violated constraint, in field order.
  std::vector<std::string> validate() const {
    std::vector<std::string> errs;
    if (!(gamma > 0.0 && gamma <= 1.0)) errs.emplace_back("gamma must be in (0, 1]");
    if (!(beta >= 0.0)) errs.emplace_back("beta must be >= 0");
    if (!(epsilon > 0.0 && epsilon < 1.0)) errs.emplace_back("epsilon must be in (0, 1)");
    if (!(alpha >= 0.0)) errs.emplace_back("alpha must be >= 0");
    if (top_k < 1) errs.emplace_back("top_k must be >= 1");
    if (num_samples < 1) errs.emplace_back("num_samples must be >= 1");
    if (ppo_epochs < 1) errs.emplace_back("ppo_epochs must be >= 1");
    if (epochs < 0) errs.emplace_back("epochs must be >= 0");
    if (max_len < 1) errs.emplace_back("max_len must be >= 1");
    if (!(lr.lr > 0.0)) errs.emplace_back("lr must be > 0");
    if (!(weight_decay >= 0.0)) errs.emplace_back("weight_decay must be >= 0");
    return errs;
  }
};

struct Advantages {
  std::vector<double> deltas;
  std::vector<double> advantages;
};

/// delta_t = r_t - V(s_t) + gamma V(s_{t+1});  A_t = sum_l gamma^l delta_{t+l}.
inline Advantages compute_advantages(std::span<const double> rewards, std::span<const double> values_old,
                                     double gamma) {
  const std::size_t T = rewards.size();
  if (values_old.size() != T + 1) throw std::invalid_argument("compute_advantages: values must have length T+1");
  Advantages out;
  out.deltas.resize(T);
  out.advantages.resize(T);
  for (std::size_t t = 0; t < T; ++t) out.deltas[t] = rewards[t] - values_old[t] + gamma * values_old[t + 1];
  double acc = 0.0;
  for (std::size_t t = T; t-- > 0;) {
    acc = out.deltas[t] + gamma * acc;
    out.advantages[t] = acc;
  }
  return out;
}

/// c_t = exp(logp_new - logp_old).
inline std::vector<double> ratio(std::span<const double> logp_new, std::span<const double> logp_old) {
  if (logp_new.size() != logp_old.size()) throw std::invalid_argument("ratio: length mismatch");
  std::vector<double> c(logp_new.size());
  for (std::size_t t = 0; t < c.size(); ++t) c[t] = std::exp(logp_new[t] - logp_old[t]);
  return c;
}

inline double clipped_term(double c, double adv, double eps) {
  return std::min(c * adv, std::clamp(c, 1.0 - eps, 1.0 + eps) * adv);
}

/// d clipped_term / dc: the advantage while the unclipped branch is the
/// minimum, zero once the clipped branch takes over.
inline double clipped_term_dc(double c, double adv, double eps) {
  return c * adv <= std::clamp(c, 1.0 - eps, 1.0 + eps) * adv ? adv : 0.0;
}

namespace detail {
inline double aggregate_scale(std::size_t T, bool sum_over_time) {
  return sum_over_time ? 1.0 : 1.0 / static_cast<double>(T);
}
}  // namespace detail

/// Mean (or sum) over t of min(c A, clip(c, 1-eps, 1+eps) A). Maximized.
inline double clipped_policy_objective(std::span<const double> c, std::span<const double> adv, double eps,
                                       bool sum_over_time = false) {
  if (c.size() != adv.size()) throw std::invalid_argument("clipped_policy_objective: length mismatch");
  if (c.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t t = 0; t < c.size(); ++t) s += clipped_term(c[t], adv[t], eps);
  return s * detail::aggregate_scale(c.size(), sum_over_time);
}

/// Squared error of the critic against returns = A + V_old.
inline double value_loss(std::span<const double> values_new, std::span<const double> advantages,
                         std::span<const double> values_old, bool sum_over_time = false) {
  if (values_new.size() != advantages.size() || values_old.size() < values_new.size())
    throw std::invalid_argument("value_loss: length mismatch");
  if (values_new.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t t = 0; t < values_new.size(); ++t) {
    const double r = values_new[t] - (advantages[t] + values_old[t]);
    s += r * r;
  }
  return s * detail::aggregate_scale(values_new.size(), sum_over_time);
}

/// L = -L_cpi + alpha * L_vf.
inline double total_loss(double policy_objective, double value_loss_term, double alpha) {
  return -policy_objective + alpha * value_loss_term;
}

enum class LossPart { Full, PolicyOnly, ValueOnly };

/// Unscaled-by-alpha loss terms of the last evaluated trajectory.
struct LossTerms {
  double policy_objective = 0.0;
  double value_loss = 0.0;
};

/// The trajectory loss consumed by policy::loss_and_grad. When `sink` is
/// set, the objective and value terms are written to it on every call.
inline policy::TrajectoryLoss make_loss(double epsilon, double alpha, bool sum_over_time,
                                        LossPart part = LossPart::Full, LossTerms* sink = nullptr) {
  return [=](const Trajectory& tr, const policy::StepEval& ev) {
    const std::size_t T = tr.length();
    policy::LossGrad g;
    g.dlogp.assign(T, 0.0);
    g.dvalue.assign(T, 0.0);
    if (T == 0) return g;
    const double scale = detail::aggregate_scale(T, sum_over_time);
    const auto c = ratio(ev.logp, tr.logp_old);
    double obj = 0.0, vf = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      const double adv = tr.advantages[t];
      obj += clipped_term(c[t], adv, epsilon);
      // dc/dlogp = c
      g.dlogp[t] = -scale * clipped_term_dc(c[t], adv, epsilon) * c[t];
      const double resid = ev.value[t] - tr.returns[t];
      vf += resid * resid;
      g.dvalue[t] = scale * 2.0 * resid;
    }
    obj *= scale;
    vf *= scale;
    if (sink) *sink = {obj, vf};
    switch (part) {
      case LossPart::Full:
        g.loss = total_loss(obj, vf, alpha);
        for (double& d : g.dvalue) d *= alpha;
        break;
      case LossPart::PolicyOnly:
        g.loss = -obj;
        std::fill(g.dvalue.begin(), g.dvalue.end(), 0.0);
        break;
      case LossPart::ValueOnly:
        g.loss = vf;
        std::fill(g.dlogp.begin(), g.dlogp.end(), 0.0);
        break;
    }
    return g;
  };
}

inline void optimizer_step(PolicyParams& params, const PolicyParams& grads, AdamState& state, double lr,
                           double weight_decay) {
  if (!(params.shape() == grads.shape())) throw std::invalid_argument("optimizer_step: shape mismatch");
  adamw_step(params.data(), grads.data(), state, AdamHyper{lr, weight_decay});
}

/// Fills reward, advantages and returns of a freshly sampled trajectory.
inline void finalize_trajectory(Trajectory& tr, const reward::TerminalScores& terminal, double beta, double gamma) {
  const auto kl = reward::kl_penalty(tr.logp_old, tr.logp_ref);
  tr.reward = reward::assemble_reward(terminal, kl, beta, tr.terminated_with_eos);
  const auto adv = compute_advantages(tr.reward.values, tr.values_old, gamma);
  tr.advantages = adv.advantages;
  tr.returns.resize(tr.length());
  for (std::size_t t = 0; t < tr.length(); ++t) tr.returns[t] = tr.advantages[t] + tr.values_old[t];
}

/// Samples and scores one episode for a task.
inline Trajectory rollout(const PolicyParams& params, const policy::ReferencePolicy& ref, const Task& task,
                          const PpoConfig& cfg, std::uint64_t seed) {
  Trajectory tr = policy::sample_topk(params, ref, task.source, cfg.top_k, cfg.max_len, seed);
  const auto terminal = reward::score_terminal(task.program(tr.program()), *task.reference, task.mode, cfg.terms);
  finalize_trajectory(tr, terminal, cfg.beta, cfg.gamma);
  return tr;
}

struct EpochMetrics {
  int epoch = 0;
  double mean_reward = 0.0;
  double mean_r_cs = 0.0;
  double mean_r_ast = 0.0;
  double mean_r_dfg = 0.0;
  double mean_kl = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double comp_rate_eval = 0.0;
  double exact_match_eval = 0.0;
  double edit_sim_eval = 0.0;
};

/// Everything needed to continue training from an epoch boundary.
struct TrainState {
  PolicyParams params;
  policy::ReferencePolicy reference;
  AdamState optimizer;
  int epoch = 0;  // completed epochs
};

inline TrainState start_training(const PolicyParams& pretrained) {
  return TrainState{pretrained, policy::freeze_reference(pretrained), {}, 0};
}

/// Called after each epoch; e.g. to write a checkpoint and a metrics line.
using EpochHook = std::function<void(const TrainState&, const EpochMetrics&)>;

/// Invoked for every trajectory right before its first update.
using TrajectoryHook = std::function<void(const Trajectory&)>;

struct TrainOptions {
  const std::vector<Task>* eval_tasks = nullptr;  // defaults to the training tasks
  EpochHook on_epoch;
  TrajectoryHook on_trajectory;
  int eval_every = 1;  // skipped epochs report NaN eval metrics; the final epoch is always evaluated
};

/// Actor-critic PPO over a task list. For each task, num_samples episodes
/// are drawn from the current policy, then each one drives an immediate
/// update; later samples of the same task therefore see ratios != 1.
inline std::vector<EpochMetrics> train(const std::vector<Task>& tasks, const PpoConfig& cfg, TrainState& state,
                                       const TrainOptions& opts = {}) {
  if (const auto errs = cfg.validate(); !errs.empty()) throw std::invalid_argument("PpoConfig: " + errs.front());
  if (tasks.empty()) throw std::invalid_argument("train: empty corpus");
  LossTerms terms;
  const auto loss_fn = make_loss(cfg.epsilon, cfg.alpha, cfg.sum_over_time, LossPart::Full, &terms);
  const auto& eval_tasks = opts.eval_tasks ? *opts.eval_tasks : tasks;
  std::vector<EpochMetrics> history;
  std::vector<std::size_t> order(tasks.size());

  for (; state.epoch < cfg.epochs; ) {
    const int epoch = state.epoch;
    std::iota(order.begin(), order.end(), 0);
    std::uint64_t shuffle = derive_seed(cfg.seed, 0x5eed, static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      shuffle = mix_seed(shuffle);
      std::swap(order[i - 1], order[shuffle % i]);
    }

    EpochMetrics m;
    m.epoch = epoch + 1;
    std::size_t n_traj = 0;
    std::vector<Trajectory> batch(static_cast<std::size_t>(cfg.num_samples));
    for (std::size_t idx : order) {
      const Task& task = tasks[idx];
      parallel_for(batch.size(), [&](std::size_t s) {
        batch[s] = rollout(state.params, state.reference, task, cfg,
                           derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch), idx, s));
      });
      for (const auto& tr : batch) {
        if (opts.on_trajectory) opts.on_trajectory(tr);
        double ret = 0.0, kl = 0.0;
        for (double r : tr.reward.values) ret += r;
        for (double k : tr.reward.r_kl) kl += k;
        m.mean_reward += ret;
        m.mean_r_cs += tr.reward.terminal.r_cs;
        m.mean_r_ast += tr.reward.terminal.r_ast;
        m.mean_r_dfg += tr.reward.terminal.r_dfg;
        m.mean_kl += kl / static_cast<double>(tr.length());
        ++n_traj;
      }
      for (int pass = 0; pass < cfg.ppo_epochs; ++pass) {
        for (const auto& tr : batch) {
          const std::span<const Trajectory> one(&tr, 1);
          const auto g = policy::loss_and_grad(state.params, one, loss_fn);
          if (pass == 0) {
            m.policy_loss += -terms.policy_objective;
            m.value_loss += terms.value_loss;
          }
          const double lr = learning_rate(cfg.lr, state.optimizer.step + 1);
          optimizer_step(state.params, g.grad, state.optimizer, lr, cfg.weight_decay);
        }
      }
    }
    const double n = static_cast<double>(n_traj);
    m.mean_reward /= n;
    m.mean_r_cs /= n;
    m.mean_r_ast /= n;
    m.mean_r_dfg /= n;
    m.mean_kl /= n;
    m.policy_loss /= n;
    m.value_loss /= n;

    if (m.epoch % std::max(opts.eval_every, 1) == 0 || m.epoch == cfg.epochs) {
      const auto ev = eval::evaluate_policy(state.params, eval_tasks, {cfg.max_len, 0, cfg.top_k, cfg.seed});
      m.comp_rate_eval = ev.comp_rate;
      m.exact_match_eval = ev.exact_match;
      m.edit_sim_eval = ev.edit_sim;
    } else {
      m.comp_rate_eval = m.exact_match_eval = m.edit_sim_eval = std::nan("");
    }

    state.epoch = epoch + 1;
    history.push_back(m);
    if (opts.on_epoch) opts.on_epoch(state, m);
  }
  return history;
}

}  // namespace rlcf::ppo

#endif  // RLCF_PPO_HPP
