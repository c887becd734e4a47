#ifndef RLCF_POLICY_HPP
#define RLCF_POLICY_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rlcf/optimizer.hpp"
#include "rlcf/reward.hpp"
#include "rlcf/vocab.hpp"

namespace rlcf::policy {

struct PolicyShape {
  int vocab = static_cast<int>(Vocabulary::size());
  int embed = 16;
  int window = 8;
  int hidden = 64;

  friend bool operator==(const PolicyShape&, const PolicyShape&) = default;
};

/// All learnable weights of the actor-critic, stored contiguously:
/// token embeddings, the window-to-hidden layer, the logit head and the
/// value head. Gradients use the same type.
class PolicyParams {
 public:
  PolicyParams() = default;
  explicit PolicyParams(PolicyShape shape) : shape_(shape) {
    if (shape.vocab < 1 || shape.embed < 1 || shape.window < 1 || shape.hidden < 1)
      throw std::invalid_argument("PolicyParams: dimensions must be positive");
    data_.assign(offset(kBlocks), 0.0);
  }

  enum Block { kEmbed, kW1, kB1, kWo, kBo, kWv, kBv, kBlocks };
  static constexpr const char* kBlockNames[kBlocks] = {"embed", "w1", "b1", "wo", "bo", "wv", "bv"};

  const PolicyShape& shape() const noexcept { return shape_; }
  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  std::size_t block_size(int b) const {
    const auto V = static_cast<std::size_t>(shape_.vocab), E = static_cast<std::size_t>(shape_.embed),
               W = static_cast<std::size_t>(shape_.window), H = static_cast<std::size_t>(shape_.hidden);
    switch (b) {
      case kEmbed: return V * E;
      case kW1: return W * E * H;
      case kB1: return H;
      case kWo: return H * V;
      case kBo: return V;
      case kWv: return H;
      case kBv: return 1;
    }
    throw std::out_of_range("bad block");
  }

  std::size_t offset(int b) const {
    std::size_t o = 0;
    for (int i = 0; i < b; ++i) o += block_size(i);
    return o;
  }

  std::span<double> block(int b) { return std::span<double>(data_).subspan(offset(b), block_size(b)); }
  std::span<const double> block(int b) const {
    return std::span<const double>(data_).subspan(offset(b), block_size(b));
  }

  void set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

 private:
  PolicyShape shape_;
  std::vector<double> data_;
};

/// Uniform(-0.08, 0.08) initialization.
inline PolicyParams init_params(const PolicyShape& shape, std::uint64_t seed) {
  PolicyParams p(shape);
  std::mt19937_64 rng(seed);
  for (double& v : p.data()) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    v = -0.08 + 0.16 * u;
  }
  return p;
}

/// The last `window` tokens of [BOS, source, SEP, prefix], left-padded with PAD.
inline std::vector<TokenId> context_window(int window, const TokenSeq& source, const TokenSeq& prefix) {
  std::vector<TokenId> ctx(static_cast<std::size_t>(window), Vocabulary::kPad);
  const std::size_t total = 1 + source.size() + 1 + prefix.size();
  auto at = [&](std::size_t i) -> TokenId {
    if (i == 0) return Vocabulary::kBos;
    if (i <= source.size()) return source[i - 1];
    if (i == source.size() + 1) return Vocabulary::kSep;
    return prefix[i - source.size() - 2];
  };
  const std::size_t n = std::min(total, ctx.size());
  for (std::size_t j = 0; j < n; ++j) ctx[ctx.size() - n + j] = at(total - n + j);
  return ctx;
}

struct Activation {
  std::vector<TokenId> ctx;
  std::vector<double> hidden;  // tanh outputs
  std::vector<double> logits;
  double value = 0.0;
};

inline Activation forward_window(const PolicyParams& p, std::vector<TokenId> ctx) {
  const auto& s = p.shape();
  const auto E = static_cast<std::size_t>(s.embed), H = static_cast<std::size_t>(s.hidden),
             V = static_cast<std::size_t>(s.vocab);
  const auto emb = p.block(PolicyParams::kEmbed);
  const auto w1 = p.block(PolicyParams::kW1);
  const auto b1 = p.block(PolicyParams::kB1);
  const auto wo = p.block(PolicyParams::kWo);
  const auto bo = p.block(PolicyParams::kBo);
  const auto wv = p.block(PolicyParams::kWv);

  Activation a;
  a.hidden.assign(b1.begin(), b1.end());
  for (std::size_t w = 0; w < ctx.size(); ++w) {
    const double* e = emb.data() + static_cast<std::size_t>(ctx[w]) * E;
    for (std::size_t i = 0; i < E; ++i) {
      const double x = e[i];
      const double* row = w1.data() + (w * E + i) * H;
      for (std::size_t j = 0; j < H; ++j) a.hidden[j] += x * row[j];
    }
  }
  for (double& h : a.hidden) h = std::tanh(h);

  a.logits.assign(bo.begin(), bo.end());
  a.value = p.block(PolicyParams::kBv)[0];
  for (std::size_t j = 0; j < H; ++j) {
    const double h = a.hidden[j];
    const double* row = wo.data() + j * V;
    for (std::size_t v = 0; v < V; ++v) a.logits[v] += h * row[v];
    a.value += h * wv[j];
  }
  a.ctx = std::move(ctx);
  return a;
}

/// Accumulates d(loss)/d(params) for one step into `grad`.
inline void backward_window(const PolicyParams& p, const Activation& a, std::span<const double> dlogits,
                            double dvalue, PolicyParams& grad) {
  const auto& s = p.shape();
  const auto E = static_cast<std::size_t>(s.embed), H = static_cast<std::size_t>(s.hidden),
             V = static_cast<std::size_t>(s.vocab);
  const auto emb = p.block(PolicyParams::kEmbed);
  const auto w1 = p.block(PolicyParams::kW1);
  const auto wo = p.block(PolicyParams::kWo);
  const auto wv = p.block(PolicyParams::kWv);
  auto g_emb = grad.block(PolicyParams::kEmbed);
  auto g_w1 = grad.block(PolicyParams::kW1);
  auto g_b1 = grad.block(PolicyParams::kB1);
  auto g_wo = grad.block(PolicyParams::kWo);
  auto g_bo = grad.block(PolicyParams::kBo);
  auto g_wv = grad.block(PolicyParams::kWv);

  std::vector<double> dpre(H);
  for (std::size_t j = 0; j < H; ++j) {
    const double h = a.hidden[j];
    const double* row = wo.data() + j * V;
    double* grow = g_wo.data() + j * V;
    double dh = wv[j] * dvalue;
    for (std::size_t v = 0; v < V; ++v) {
      grow[v] += h * dlogits[v];
      dh += row[v] * dlogits[v];
    }
    g_wv[j] += h * dvalue;
    dpre[j] = dh * (1.0 - h * h);
    g_b1[j] += dpre[j];
  }
  for (std::size_t v = 0; v < V; ++v) g_bo[v] += dlogits[v];
  grad.block(PolicyParams::kBv)[0] += dvalue;

  for (std::size_t w = 0; w < a.ctx.size(); ++w) {
    const std::size_t tok = a.ctx[w];
    const double* e = emb.data() + tok * E;
    double* ge = g_emb.data() + tok * E;
    for (std::size_t i = 0; i < E; ++i) {
      const std::size_t r = (w * E + i) * H;
      const double x = e[i];
      double dx = 0.0;
      for (std::size_t j = 0; j < H; ++j) {
        g_w1[r + j] += x * dpre[j];
        dx += w1[r + j] * dpre[j];
      }
      ge[i] += dx;
    }
  }
}

inline std::vector<double> log_softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - mx);
  const double lse = mx + std::log(z);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

struct StepOutput {
  std::vector<double> logits;
  double value = 0.0;
};

/// Next-token logits and critic value for the state (source, prefix).
inline StepOutput forward(const PolicyParams& p, const TokenSeq& source, const TokenSeq& prefix) {
  auto a = forward_window(p, context_window(p.shape().window, source, prefix));
  return {std::move(a.logits), a.value};
}

/// Immutable snapshot of a policy, used as the KL anchor.
class ReferencePolicy {
 public:
  explicit ReferencePolicy(PolicyParams p) : params_(std::make_shared<const PolicyParams>(std::move(p))) {}
  const PolicyParams& params() const noexcept { return *params_; }

 private:
  std::shared_ptr<const PolicyParams> params_;
};

inline ReferencePolicy freeze_reference(const PolicyParams& p) { return ReferencePolicy(p); }

/// One sampled generation episode. Per-step vectors have length T except
/// values_old, which carries the terminal bootstrap V(s_T) = 0.
struct Trajectory {
  TokenSeq source;
  TokenSeq actions;
  std::vector<double> logp_old;
  std::vector<double> logp_ref;
  std::vector<double> values_old;
  reward::RewardVector reward;
  std::vector<double> advantages;
  std::vector<double> returns;
  bool terminated_with_eos = false;

  std::size_t length() const noexcept { return actions.size(); }

  /// Generated program tokens (actions without the closing EOS).
  TokenSeq program() const {
    TokenSeq out = actions;
    if (terminated_with_eos && !out.empty()) out.pop_back();
    return out;
  }
};

/// Indices of the k most probable tokens; ties resolve to the lower id.
inline std::vector<int> top_k_indices(std::span<const double> logits, int k) {
  std::vector<int> idx(logits.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return logits[a] > logits[b]; });
  idx.resize(static_cast<std::size_t>(std::min<int>(k, static_cast<int>(idx.size()))));
  return idx;
}

namespace detail {
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
}  // namespace detail

/// Samples from the renormalized top-k distribution. logp_old and logp_ref
/// are taken from the full distributions of the policy and the reference.
inline Trajectory sample_topk(const PolicyParams& p, const ReferencePolicy& ref, const TokenSeq& source,
                              int k, int max_len, std::uint64_t seed) {
  if (k < 1 || k > p.shape().vocab) throw std::invalid_argument("sample_topk: k out of range");
  if (max_len < 1) throw std::invalid_argument("sample_topk: max_len must be >= 1");
  std::mt19937_64 rng(seed);
  Trajectory tr;
  tr.source = source;
  const int W = p.shape().window;
  while (static_cast<int>(tr.actions.size()) < max_len) {
    auto ctx = context_window(W, source, tr.actions);
    const auto ref_act = forward_window(ref.params(), ctx);
    const auto act = forward_window(p, std::move(ctx));
    const auto lp = log_softmax(act.logits);
    const auto top = top_k_indices(lp, k);

    TokenId choice = static_cast<TokenId>(top.front());
    if (k > 1) {
      double z = 0.0;
      for (int i : top) z += std::exp(lp[static_cast<std::size_t>(i)]);
      double u = detail::unit_uniform(rng) * z;
      for (int i : top) {
        choice = static_cast<TokenId>(i);
        u -= std::exp(lp[static_cast<std::size_t>(i)]);
        if (u < 0.0) break;
      }
    }
    tr.actions.push_back(choice);
    tr.logp_old.push_back(lp[choice]);
    tr.logp_ref.push_back(log_softmax(ref_act.logits)[choice]);
    tr.values_old.push_back(act.value);
    if (choice == Vocabulary::kEos) {
      tr.terminated_with_eos = true;
      break;
    }
  }
  tr.values_old.push_back(0.0);
  return tr;
}

/// Argmax decoding; returns the program tokens without the closing EOS.
inline TokenSeq decode_greedy(const PolicyParams& p, const TokenSeq& source, int max_len) {
  TokenSeq out;
  const int W = p.shape().window;
  while (static_cast<int>(out.size()) < max_len) {
    const auto act = forward_window(p, context_window(W, source, out));
    const auto best = static_cast<TokenId>(
        std::max_element(act.logits.begin(), act.logits.end()) - act.logits.begin());
    if (best == Vocabulary::kEos) break;
    out.push_back(best);
  }
  return out;
}

/// Per-step log-probabilities of the taken actions and critic values
/// under the current parameters.
struct StepEval {
  std::vector<double> logp;
  std::vector<double> value;
};

/// A differentiable per-trajectory loss expressed through StepEval:
/// returns the loss and its partials w.r.t. each logp[t] and value[t].
struct LossGrad {
  double loss = 0.0;
  std::vector<double> dlogp;
  std::vector<double> dvalue;
};
using TrajectoryLoss = std::function<LossGrad(const Trajectory&, const StepEval&)>;

class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::vector<Activation> replay(const PolicyParams& p, const Trajectory& tr, StepEval& eval) {
  std::vector<Activation> acts;
  acts.reserve(tr.length());
  eval.logp.resize(tr.length());
  eval.value.resize(tr.length());
  TokenSeq prefix;
  prefix.reserve(tr.length());
  for (std::size_t t = 0; t < tr.length(); ++t) {
    acts.push_back(forward_window(p, context_window(p.shape().window, tr.source, prefix)));
    eval.logp[t] = log_softmax(acts.back().logits)[tr.actions[t]];
    eval.value[t] = acts.back().value;
    prefix.push_back(tr.actions[t]);
  }
  return acts;
}

inline void check_finite(double loss, const Trajectory& tr) {
  if (std::isfinite(loss)) return;
  throw NonFiniteLoss("non-finite loss on trajectory of length " + std::to_string(tr.length()) +
                      " with actions [" + detokenize(tr.actions) + "]");
}

}  // namespace detail

inline StepEval evaluate_steps(const PolicyParams& p, const Trajectory& tr) {
  StepEval e;
  detail::replay(p, tr, e);
  return e;
}

struct GradResult {
  double loss = 0.0;
  PolicyParams grad;
};

/// Mean loss over a batch of trajectories and its exact gradient.
inline GradResult loss_and_grad(const PolicyParams& p, std::span<const Trajectory> batch,
                                const TrajectoryLoss& loss_fn) {
  GradResult out{0.0, PolicyParams(p.shape())};
  if (batch.empty()) return out;
  const double scale = 1.0 / static_cast<double>(batch.size());
  std::vector<double> dlogits(static_cast<std::size_t>(p.shape().vocab));
  for (const auto& tr : batch) {
    StepEval eval;
    const auto acts = detail::replay(p, tr, eval);
    const LossGrad lg = loss_fn(tr, eval);
    detail::check_finite(lg.loss, tr);
    out.loss += scale * lg.loss;
    for (std::size_t t = 0; t < tr.length(); ++t) {
      const double gl = scale * lg.dlogp[t];
      const double gv = scale * lg.dvalue[t];
      if (gl == 0.0 && gv == 0.0) continue;
      // d logp(a) / d logits = onehot(a) - softmax
      const auto lp = log_softmax(acts[t].logits);
      for (std::size_t v = 0; v < dlogits.size(); ++v) dlogits[v] = -gl * std::exp(lp[v]);
      dlogits[tr.actions[t]] += gl;
      backward_window(p, acts[t], dlogits, gv, out.grad);
    }
  }
  return out;
}

inline double loss_only(const PolicyParams& p, std::span<const Trajectory> batch, const TrajectoryLoss& loss_fn) {
  double loss = 0.0;
  for (const auto& tr : batch) {
    const LossGrad lg = loss_fn(tr, evaluate_steps(p, tr));
    detail::check_finite(lg.loss, tr);
    loss += lg.loss / static_cast<double>(batch.size());
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Supervised warm start

struct Example {
  TokenSeq source;
  TokenSeq target;
};

struct MleConfig {
  int epochs = 10;
  double lr = 3e-3;
  double weight_decay = 0.0;
  std::uint64_t seed = 1;
};

struct MleResult {
  PolicyParams params;
  std::vector<double> epoch_loss;  // mean per-token cross-entropy seen during each epoch
};

/// Mean teacher-forced cross-entropy of target + EOS given the source.
inline double cross_entropy(const PolicyParams& p, const Example& ex) {
  TokenSeq prefix;
  double ce = 0.0;
  for (std::size_t t = 0; t <= ex.target.size(); ++t) {
    const TokenId y = t < ex.target.size() ? ex.target[t] : Vocabulary::kEos;
    const auto a = forward_window(p, context_window(p.shape().window, ex.source, prefix));
    ce -= log_softmax(a.logits)[y];
    prefix.push_back(y);
  }
  return ce / static_cast<double>(ex.target.size() + 1);
}

/// Teacher-forced next-token training with one AdamW step per example.
inline MleResult pretrain_mle(PolicyParams params, const std::vector<Example>& corpus, const MleConfig& cfg) {
  if (corpus.empty()) throw std::invalid_argument("pretrain_mle: empty corpus");
  MleResult res;
  AdamState opt;
  const AdamHyper hyper{cfg.lr, cfg.weight_decay};
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  PolicyParams grad(params.shape());
  std::vector<double> dlogits(static_cast<std::size_t>(params.shape().vocab));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    double total = 0.0;
    std::size_t tokens = 0;
    for (std::size_t idx : order) {
      const Example& ex = corpus[idx];
      grad.set_zero();
      TokenSeq prefix;
      const std::size_t T = ex.target.size() + 1;
      const double scale = 1.0 / static_cast<double>(T);
      for (std::size_t t = 0; t < T; ++t) {
        const TokenId y = t < ex.target.size() ? ex.target[t] : Vocabulary::kEos;
        const auto a = forward_window(params, context_window(params.shape().window, ex.source, prefix));
        const auto lp = log_softmax(a.logits);
        total -= lp[y];
        for (std::size_t v = 0; v < dlogits.size(); ++v) dlogits[v] = scale * std::exp(lp[v]);
        dlogits[y] -= scale;
        backward_window(params, a, dlogits, 0.0, grad);
        prefix.push_back(y);
      }
      tokens += T;
      adamw_step(params.data(), grad.data(), opt, hyper);
    }
    res.epoch_loss.push_back(total / static_cast<double>(tokens));
  }
  res.params = std::move(params);
  return res;
}

}  // namespace rlcf::policy

#endif  // RLCF_POLICY_HPP
