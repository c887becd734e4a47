#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "rlcf/corpus.hpp"
#include "rlcf/policy.hpp"
#include "rlcf/ppo.hpp"
#include "support/oracles.hpp"

using namespace rlcf;
using namespace rlcf::policy;
using V = Vocabulary;

namespace {

TokenSeq random_tokens(std::mt19937_64& rng, std::size_t n) {
  TokenSeq t;
  for (std::size_t i = 0; i < n; ++i) t.push_back(static_cast<TokenId>(V::kFirstIdent + rng() % (V::size() - V::kFirstIdent)));
  return t;
}

}  // namespace

TEST(PolicyParams, ShapesAndInitRange) {
  const auto p = init_params({}, 1);
  const auto& s = p.shape();
  EXPECT_EQ(s.vocab, 31);
  EXPECT_EQ(p.block(PolicyParams::kEmbed).size(), 31u * 16u);
  EXPECT_EQ(p.block(PolicyParams::kW1).size(), 8u * 16u * 64u);
  EXPECT_EQ(p.block(PolicyParams::kWo).size(), 64u * 31u);
  EXPECT_EQ(p.block(PolicyParams::kBv).size(), 1u);
  for (double v : p.data()) {
    EXPECT_GE(v, -0.08);
    EXPECT_LT(v, 0.08);
  }
  EXPECT_TRUE(p.all_finite());
  EXPECT_THROW(PolicyParams({31, 0, 8, 64}), std::invalid_argument);
}

TEST(PolicyParams, InitIsSeeded) {
  const auto a = init_params({}, 5), b = init_params({}, 5), c = init_params({}, 6);
  EXPECT_TRUE(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
  EXPECT_FALSE(std::equal(a.data().begin(), a.data().end(), c.data().begin()));
}

TEST(ContextWindow, EmptyPrefixIsPaddedTailOfSourceAndSep) {
  const TokenSeq src{V::digit(1), V::digit(2)};
  EXPECT_EQ(context_window(8, src, {}),
            (std::vector<TokenId>{V::kPad, V::kPad, V::kPad, V::kPad, V::kBos, V::digit(1), V::digit(2), V::kSep}));
  EXPECT_EQ(context_window(2, src, {}), (std::vector<TokenId>{V::digit(2), V::kSep}));
}

TEST(ContextWindow, KeepsLastTokens) {
  const TokenSeq src{V::digit(1)};
  const TokenSeq pre{V::digit(5), V::digit(6), V::digit(7)};
  EXPECT_EQ(context_window(4, src, pre), (std::vector<TokenId>{V::kSep, V::digit(5), V::digit(6), V::digit(7)}));
}

TEST(Forward, SoftmaxNormalizes) {
  std::mt19937_64 rng(1);
  const auto p = oracle::random_params(2);
  for (int i = 0; i < 100; ++i) {
    const auto out = forward(p, random_tokens(rng, rng() % 12), random_tokens(rng, rng() % 12));
    const auto lp = log_softmax(out.logits);
    double z = 0.0;
    for (double v : lp) {
      EXPECT_TRUE(std::isfinite(v));
      EXPECT_LE(v, 0.0);
      z += std::exp(v);
    }
    EXPECT_NEAR(z, 1.0, 1e-9);
  }
}

TEST(Forward, DeterministicAndWindowed) {
  const auto p = oracle::random_params(3);
  const TokenSeq src{V::digit(3)}, pre{V::digit(4)};
  const auto a = forward(p, src, pre), b = forward(p, src, pre);
  EXPECT_EQ(a.logits, b.logits);
  EXPECT_EQ(a.value, b.value);
  // Tokens beyond the window do not change the output.
  TokenSeq long_src(20, V::digit(9));
  TokenSeq long_src2 = long_src;
  long_src2[0] = V::digit(0);
  EXPECT_EQ(forward(p, long_src, pre).logits, forward(p, long_src2, pre).logits);
}

TEST(LogSoftmax, StableForLargeLogits) {
  const std::vector<double> x{1000.0, 0.0, -1000.0};
  const auto lp = log_softmax(x);
  EXPECT_NEAR(lp[0], 0.0, 1e-12);
  EXPECT_TRUE(std::isfinite(lp[2]));
}

TEST(TopK, OrderAndTies) {
  const std::vector<double> l{0.5, 2.0, 2.0, -1.0};
  EXPECT_EQ(top_k_indices(l, 2), (std::vector<int>{1, 2}));
  EXPECT_EQ(top_k_indices(l, 3), (std::vector<int>{1, 2, 0}));
  EXPECT_EQ(top_k_indices(l, 1), (std::vector<int>{1}));
}

TEST(SampleTopk, KOneIsGreedyAndDeterministic) {
  const auto p = oracle::random_params(4);
  const auto ref = freeze_reference(p);
  const TokenSeq src{V::digit(1), V::kPlus};
  const auto a = sample_topk(p, ref, src, 1, 30, 1), b = sample_topk(p, ref, src, 1, 30, 2);
  EXPECT_EQ(a.actions, b.actions);
  EXPECT_EQ(a.program(), decode_greedy(p, src, 30));
}

TEST(SampleTopk, RecordsFullDistributionAndRespectsSupport) {
  const auto p = oracle::random_params(5);
  const auto ref = freeze_reference(oracle::random_params(6));
  std::mt19937_64 rng(7);
  for (int i = 0; i < 50; ++i) {
    const TokenSeq src = random_tokens(rng, 4);
    const int k = 1 + static_cast<int>(rng() % 6);
    const auto tr = sample_topk(p, ref, src, k, 12, rng());
    ASSERT_EQ(tr.values_old.size(), tr.length() + 1);
    EXPECT_EQ(tr.values_old.back(), 0.0);
    TokenSeq prefix;
    for (std::size_t t = 0; t < tr.length(); ++t) {
      const auto out = forward(p, src, prefix);
      const auto lp = log_softmax(out.logits);
      const auto top = top_k_indices(lp, k);
      EXPECT_NE(std::find(top.begin(), top.end(), tr.actions[t]), top.end());
      EXPECT_EQ(tr.logp_old[t], lp[tr.actions[t]]);
      EXPECT_LE(tr.logp_old[t], 0.0);
      EXPECT_EQ(tr.logp_ref[t], log_softmax(forward(ref.params(), src, prefix).logits)[tr.actions[t]]);
      EXPECT_EQ(tr.values_old[t], out.value);
      prefix.push_back(tr.actions[t]);
    }
    EXPECT_EQ(tr.terminated_with_eos, !tr.actions.empty() && tr.actions.back() == V::kEos);
    if (!tr.terminated_with_eos) {
      EXPECT_EQ(tr.length(), 12u);
    }
  }
}

TEST(SampleTopk, FullVocabularyAndSeeds) {
  const auto p = init_params({}, 8);
  const auto ref = freeze_reference(p);
  const auto a = sample_topk(p, ref, {}, 31, 20, 1), b = sample_topk(p, ref, {}, 31, 20, 1);
  EXPECT_EQ(a.actions, b.actions);
  EXPECT_THROW(sample_topk(p, ref, {}, 0, 20, 1), std::invalid_argument);
  EXPECT_THROW(sample_topk(p, ref, {}, 32, 20, 1), std::invalid_argument);
  EXPECT_THROW(sample_topk(p, ref, {}, 5, 0, 1), std::invalid_argument);
}

TEST(FreezeReference, IsADeepImmutableCopy) {
  auto p = oracle::random_params(9);
  const auto ref = freeze_reference(p);
  const TokenSeq src{V::digit(2)};
  EXPECT_EQ(forward(ref.params(), src, {}).logits, forward(p, src, {}).logits);
  const auto before = forward(ref.params(), src, {}).logits;
  for (double& v : p.data()) v += 0.1;
  EXPECT_EQ(forward(ref.params(), src, {}).logits, before);
  EXPECT_NE(forward(p, src, {}).logits, before);
}

TEST(FreezeReference, ZeroKlRightAfterFreezing) {
  const auto p = oracle::random_params(10);
  const auto ref = freeze_reference(p);
  const auto tr = sample_topk(p, ref, {V::digit(1)}, 5, 20, 3);
  for (double k : reward::kl_penalty(tr.logp_old, tr.logp_ref)) EXPECT_EQ(k, 0.0);
}

TEST(Grad, MatchesFiniteDifferencesForEachLossPart) {
  std::mt19937_64 rng(21);
  for (auto part : {ppo::LossPart::Full, ppo::LossPart::PolicyOnly, ppo::LossPart::ValueOnly}) {
    for (int i = 0; i < 2; ++i) {
      const auto p = oracle::random_params(30 + static_cast<std::uint64_t>(i), {31, 4, 3, 8});
      std::vector<Trajectory> batch{oracle::random_trajectory(p, rng), oracle::random_trajectory(p, rng)};
      const auto r = oracle::finite_difference(p, batch, ppo::make_loss(0.2, 0.5, false, part));
      EXPECT_LT(r.max_rel_error, 1e-3) << static_cast<int>(part);
    }
  }
}

TEST(Grad, SumOverTimeVariant) {
  std::mt19937_64 rng(22);
  const auto p = oracle::random_params(40, {31, 4, 3, 8});
  std::vector<Trajectory> batch{oracle::random_trajectory(p, rng)};
  EXPECT_LT(oracle::finite_difference(p, batch, ppo::make_loss(0.2, 1.0, true)).max_rel_error, 1e-3);
}

TEST(Grad, ZeroAdvantageWithoutValueLossIsZero) {
  std::mt19937_64 rng(23);
  const auto p = oracle::random_params(41);
  auto tr = oracle::random_trajectory(p, rng);
  std::fill(tr.advantages.begin(), tr.advantages.end(), 0.0);
  const auto g = loss_and_grad(p, std::span<const Trajectory>(&tr, 1), ppo::make_loss(0.2, 0.0, false));
  for (double v : g.grad.data()) EXPECT_EQ(v, 0.0);
}

TEST(Grad, ScalingTheLossScalesTheGradient) {
  std::mt19937_64 rng(24);
  const auto p = oracle::random_params(42);
  const auto tr = oracle::random_trajectory(p, rng);
  const auto base = ppo::make_loss(0.2, 0.001, false);
  const TrajectoryLoss doubled = [&](const Trajectory& t, const StepEval& e) {
    auto g = base(t, e);
    g.loss *= 2;
    for (auto& d : g.dlogp) d *= 2;
    for (auto& d : g.dvalue) d *= 2;
    return g;
  };
  const std::span<const Trajectory> one(&tr, 1);
  const auto a = loss_and_grad(p, one, base), b = loss_and_grad(p, one, doubled);
  for (std::size_t i = 0; i < a.grad.data().size(); ++i) EXPECT_EQ(b.grad.data()[i], 2.0 * a.grad.data()[i]);
}

TEST(Grad, NonFiniteLossAborts) {
  std::mt19937_64 rng(25);
  const auto p = oracle::random_params(43);
  const auto tr = oracle::random_trajectory(p, rng);
  const TrajectoryLoss bad = [](const Trajectory& t, const StepEval&) {
    LossGrad g;
    g.loss = std::nan("");
    g.dlogp.assign(t.length(), 0.0);
    g.dvalue.assign(t.length(), 0.0);
    return g;
  };
  EXPECT_THROW(loss_and_grad(p, std::span<const Trajectory>(&tr, 1), bad), NonFiniteLoss);
}

TEST(Mle, LossDecreasesOverFirstEpochs) {
  corpus::CorpusSpec spec;
  spec.count = 500;
  spec.mask_len = 10;
  const auto tasks = corpus::to_tasks(corpus::generate_corpus(7, spec), corpus::TaskKind::Completion, 10);
  const auto res = pretrain_mle(init_params({}, 1), corpus::to_examples(tasks), {5, 3e-3, 0.0, 1});
  ASSERT_EQ(res.epoch_loss.size(), 5u);
  for (std::size_t e = 1; e < res.epoch_loss.size(); ++e) EXPECT_LT(res.epoch_loss[e], res.epoch_loss[e - 1]);
}

TEST(Mle, MemorizesASingleProgram) {
  const Example ex{tokenize("a = 1 ;"), tokenize("return a ;")};
  const auto res = pretrain_mle(init_params({}, 2), {ex}, {300, 1e-2, 0.0, 2});
  EXPECT_LT(cross_entropy(res.params, ex), 0.05);
  EXPECT_EQ(decode_greedy(res.params, ex.source, 10), ex.target);
}

TEST(Mle, DeterministicGivenSeed) {
  const std::vector<Example> c{{tokenize("a = 1 ;"), tokenize("return a ;")}, {tokenize("b = 2 ;"), tokenize("return b ;")}};
  const auto a = pretrain_mle(init_params({}, 3), c, {3, 3e-3, 0.0, 9});
  const auto b = pretrain_mle(init_params({}, 3), c, {3, 3e-3, 0.0, 9});
  EXPECT_TRUE(std::equal(a.params.data().begin(), a.params.data().end(), b.params.data().begin()));
  EXPECT_THROW(pretrain_mle(init_params({}, 3), {}, {}), std::invalid_argument);
}
