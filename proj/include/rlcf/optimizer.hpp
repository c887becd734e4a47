#ifndef RLCF_OPTIMIZER_HPP
#define RLCF_OPTIMIZER_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rlcf {

/// Moment buffers for AdamW. Sized lazily on the first step.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;
};

struct AdamHyper {
  double lr = 1e-3;
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One AdamW step with decoupled weight decay:
///   p <- p - lr * wd * p - lr * m_hat / (sqrt(v_hat) + eps)
inline void adamw_step(std::span<double> params, std::span<const double> grads, AdamState& state,
                       const AdamHyper& h) {
  if (params.size() != grads.size()) throw std::invalid_argument("adamw_step: shape mismatch");
  for (std::size_t i = 0; i < grads.size(); ++i)
    if (!std::isfinite(grads[i]))
      throw std::runtime_error("adamw_step: non-finite gradient at index " + std::to_string(i));
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
    state.step = 0;
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  const double decay = 1.0 - h.lr * h.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = h.beta1 * state.m[i] + (1.0 - h.beta1) * g;
    state.v[i] = h.beta2 * state.v[i] + (1.0 - h.beta2) * g * g;
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] = params[i] * decay - h.lr * mhat / (std::sqrt(vhat) + h.eps);
  }
}

enum class LrSchedule { Constant, WarmupInvSqrt };

struct LrConfig {
  LrSchedule schedule = LrSchedule::Constant;
  double lr = 1e-3;
  double warmup_init = 1e-7;
  std::int64_t warmup_steps = 1000;
};

/// Learning rate for 1-based step `step`. The warmup schedule ramps
/// linearly from warmup_init to lr, then decays as lr * sqrt(warmup / step).
inline double learning_rate(const LrConfig& c, std::int64_t step) {
  if (c.schedule == LrSchedule::Constant) return c.lr;
  const double s = static_cast<double>(std::max<std::int64_t>(step, 1));
  const double w = static_cast<double>(std::max<std::int64_t>(c.warmup_steps, 1));
  if (s < w) return c.warmup_init + (c.lr - c.warmup_init) * s / w;
  return c.lr * std::sqrt(w / s);
}

}  // namespace rlcf

#endif  // RLCF_OPTIMIZER_HPP
