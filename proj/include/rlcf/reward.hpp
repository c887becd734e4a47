#ifndef RLCF_REWARD_HPP
#define RLCF_REWARD_HPP

#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "rlcf/minilang.hpp"

namespace rlcf::reward {

using lang::UnitTest;

/// Chooses between the unit-test scale and the compile-only scale.
class RewardMode {
 public:
  enum class Kind { Functional, Syntactic };

  static RewardMode syntactic() { return RewardMode(Kind::Syntactic, {}); }
  static RewardMode functional(std::vector<UnitTest> tests) {
    if (tests.empty()) throw std::invalid_argument("functional reward mode needs at least one unit test");
    return RewardMode(Kind::Functional, std::move(tests));
  }

  Kind kind() const noexcept { return kind_; }
  const std::vector<UnitTest>& tests() const noexcept { return tests_; }

 private:
  RewardMode(Kind k, std::vector<UnitTest> t) : kind_(k), tests_(std::move(t)) {}
  Kind kind_;
  std::vector<UnitTest> tests_;
};

namespace levels {
inline constexpr double kPass = 1.0;
inline constexpr double kFailedTest = -0.3;
inline constexpr double kRuntimeError = -0.6;
inline constexpr double kCompileError = -1.0;
}  // namespace levels

inline double compile_signal(const lang::CompileResult& compiled, const RewardMode& mode) {
  if (!compiled.tree) return levels::kCompileError;
  if (mode.kind() == RewardMode::Kind::Syntactic) return levels::kPass;
  switch (lang::run_tests(*compiled.tree, mode.tests())) {
    case lang::TestOutcome::AllPassed: return levels::kPass;
    case lang::TestOutcome::FailedTest: return levels::kFailedTest;
    case lang::TestOutcome::RuntimeError: return levels::kRuntimeError;
  }
  return levels::kCompileError;
}

inline double compile_signal(const TokenSeq& hyp, const RewardMode& mode) {
  return compile_signal(lang::compile(hyp), mode);
}

/// Subtree fingerprints and data-flow edges of a reference program,
/// computed once and matched against many hypotheses.
class MatchReference {
 public:
  explicit MatchReference(const TokenSeq& ref) {
    auto compiled = lang::compile(ref);
    if (!compiled.tree)
      throw std::invalid_argument("reference program does not compile: " + compiled.report.message);
    subtrees_ = lang::extract_subtrees(*compiled.tree);
    edges_ = lang::extract_dfg(*compiled.tree).edges;
  }

  const std::vector<std::string>& subtrees() const noexcept { return subtrees_; }
  const std::vector<lang::DfgEdge>& edges() const noexcept { return edges_; }

  /// Share of reference subtrees found in the hypothesis; each hypothesis
  /// subtree can be consumed by at most one reference subtree.
  double ast_match(const lang::AstTree* hyp_tree) const {
    if (!hyp_tree) return 0.0;
    std::unordered_map<std::string, int> pool;
    for (auto& fp : lang::extract_subtrees(*hyp_tree)) ++pool[fp];
    int matched = 0;
    for (const auto& fp : subtrees_) {
      auto it = pool.find(fp);
      if (it != pool.end() && it->second > 0) {
        --it->second;
        ++matched;
      }
    }
    return static_cast<double>(matched) / static_cast<double>(subtrees_.size());
  }

  /// Share of reference data-flow edges found in the hypothesis. A reference
  /// without edges scores 1 against any compilable hypothesis.
  double dfg_match(const lang::AstTree* compiled_hyp) const {
    if (!compiled_hyp) return 0.0;
    if (edges_.empty()) return 1.0;
    std::unordered_map<std::string, int> pool;
    for (auto& e : lang::extract_dfg(*compiled_hyp).edges) ++pool[e.source + '\x1f' + e.target];
    int matched = 0;
    for (const auto& e : edges_) {
      auto it = pool.find(e.source + '\x1f' + e.target);
      if (it != pool.end() && it->second > 0) {
        --it->second;
        ++matched;
      }
    }
    return static_cast<double>(matched) / static_cast<double>(edges_.size());
  }

 private:
  std::vector<std::string> subtrees_;
  std::vector<lang::DfgEdge> edges_;
};

inline double ast_match(const TokenSeq& hyp, const TokenSeq& ref) {
  const auto parsed = lang::parse(hyp);
  return MatchReference(ref).ast_match(parsed.tree ? &*parsed.tree : nullptr);
}

inline double dfg_match(const TokenSeq& hyp, const TokenSeq& ref) {
  const auto compiled = lang::compile(hyp);
  return MatchReference(ref).dfg_match(compiled.tree ? &*compiled.tree : nullptr);
}

/// Per-step log-ratio of the sampled action under the active and reference policies.
inline std::vector<double> kl_penalty(const std::vector<double>& logp_pi,
                                      const std::vector<double>& logp_rho) {
  if (logp_pi.size() != logp_rho.size())
    throw std::invalid_argument("kl_penalty: length mismatch");
  std::vector<double> out(logp_pi.size());
  for (std::size_t t = 0; t < out.size(); ++t) out[t] = logp_pi[t] - logp_rho[t];
  return out;
}

/// Which terminal terms enter the reward; all on by default.
struct RewardTerms {
  bool compile = true;
  bool ast = true;
  bool dfg = true;
};

struct TerminalScores {
  double r_cs = 0.0;
  double r_ast = 0.0;
  double r_dfg = 0.0;

  double sum() const noexcept { return r_cs + r_ast + r_dfg; }
};

/// Scores a hypothesis with a single parse. Disabled terms read as 0.
inline TerminalScores score_terminal(const TokenSeq& hyp, const MatchReference& ref,
                                     const RewardMode& mode, RewardTerms terms = {}) {
  auto parsed = lang::parse(hyp);
  TerminalScores s;
  lang::CompileResult compiled;
  if (parsed.tree) {
    auto report = lang::static_check(*parsed.tree);
    if (report.ok())
      compiled.tree = *parsed.tree;
    else
      compiled.report = std::move(report);
  } else {
    compiled.report = parsed.report;
  }
  if (terms.compile) s.r_cs = compile_signal(compiled, mode);
  if (terms.ast) s.r_ast = ref.ast_match(parsed.tree ? &*parsed.tree : nullptr);
  if (terms.dfg) s.r_dfg = ref.dfg_match(compiled.tree ? &*compiled.tree : nullptr);
  return s;
}

struct RewardVector {
  std::vector<double> values;
  TerminalScores terminal;
  std::vector<double> r_kl;
  bool terminated_with_eos = true;

  std::size_t size() const noexcept { return values.size(); }
};

/// values[t] = -beta * kl[t]; the terminal scores are added at the last
/// step whether or not the episode ended with EOS.
inline RewardVector assemble_reward(const TerminalScores& terminal, const std::vector<double>& kl,
                                    double beta, bool terminated_with_eos) {
  if (kl.empty()) throw std::invalid_argument("assemble_reward: empty trajectory");
  RewardVector r;
  r.values.resize(kl.size());
  for (std::size_t t = 0; t < kl.size(); ++t) r.values[t] = 0.0 - beta * kl[t];  // no negative zero
  r.values.back() += terminal.sum();
  r.terminal = terminal;
  r.r_kl = kl;
  r.terminated_with_eos = terminated_with_eos;
  return r;
}

inline RewardVector assemble_reward(const TokenSeq& hyp, const TokenSeq& ref, const RewardMode& mode,
                                    const std::vector<double>& kl, double beta,
                                    bool terminated_with_eos) {
  return assemble_reward(score_terminal(hyp, MatchReference(ref), mode), kl, beta,
                         terminated_with_eos);
}

}  // namespace rlcf::reward

#endif  // RLCF_REWARD_HPP
