#ifndef RLCF_EVAL_HPP
#define RLCF_EVAL_HPP

#include <algorithm>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "rlcf/minilang.hpp"
#include "rlcf/parallel.hpp"
#include "rlcf/policy.hpp"
#include "rlcf/task.hpp"

namespace rlcf::eval {

inline bool compiles(const TokenSeq& program) { return lang::compile(program).tree.has_value(); }

inline double compilation_rate(const std::vector<TokenSeq>& hyps) {
  if (hyps.empty()) throw std::invalid_argument("compilation_rate: no hypotheses");
  std::size_t ok = 0;
  for (const auto& h : hyps) ok += compiles(h);
  return static_cast<double>(ok) / static_cast<double>(hyps.size());
}

inline double exact_match(const std::vector<TokenSeq>& hyps, const std::vector<TokenSeq>& refs) {
  if (hyps.size() != refs.size()) throw std::invalid_argument("exact_match: length mismatch");
  if (hyps.empty()) return 0.0;
  std::size_t same = 0;
  for (std::size_t i = 0; i < hyps.size(); ++i) same += hyps[i] == refs[i];
  return static_cast<double>(same) / static_cast<double>(hyps.size());
}

inline std::size_t levenshtein(std::string_view a, std::string_view b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

inline double edit_similarity(std::string_view a, std::string_view b) {
  const std::size_t n = std::max(a.size(), b.size());
  if (n == 0) return 1.0;
  return 1.0 - static_cast<double>(levenshtein(a, b)) / static_cast<double>(n);
}

/// Character-level similarity of the single-space detokenized forms.
inline double edit_similarity(const TokenSeq& hyp, const TokenSeq& ref) {
  return edit_similarity(detokenize(hyp), detokenize(ref));
}

/// Fraction of problems where at least one of the first k samples passes.
inline double pass_at_k(const std::vector<std::vector<bool>>& passed, int k) {
  if (passed.empty()) return 0.0;
  std::size_t solved = 0;
  for (const auto& samples : passed) {
    if (static_cast<int>(samples.size()) < k) throw std::invalid_argument("pass_at_k: fewer than k samples");
    solved += std::any_of(samples.begin(), samples.begin() + k, [](bool b) { return b; });
  }
  return static_cast<double>(solved) / static_cast<double>(passed.size());
}

struct Problem {
  std::vector<lang::UnitTest> tests;
  std::vector<TokenSeq> samples;
};

inline bool passes_all(const TokenSeq& program, const std::vector<lang::UnitTest>& tests) {
  const auto c = lang::compile(program);
  return c.tree && lang::run_tests(*c.tree, tests) == lang::TestOutcome::AllPassed;
}

inline double pass_at_k(const std::vector<Problem>& problems, int k) {
  std::vector<std::vector<bool>> flags;
  flags.reserve(problems.size());
  for (const auto& p : problems) {
    if (static_cast<int>(p.samples.size()) != k) throw std::invalid_argument("pass_at_k: each problem needs exactly k samples");
    std::vector<bool> f;
    for (const auto& s : p.samples) f.push_back(passes_all(s, p.tests));
    flags.push_back(std::move(f));
  }
  return pass_at_k(flags, k);
}

struct MetricsRecord {
  double comp_rate = 0.0;
  double exact_match = 0.0;
  double edit_sim = 0.0;
  double ast_mean = 0.0;
  double dfg_mean = 0.0;
  std::map<int, double> pass_at_k;
  std::size_t n_eval = 0;
};

struct EvalOptions {
  int max_len = 40;
  int pass_k = 0;  // samples per problem for pass@1..pass_k; 0 disables
  int top_k = 5;
  std::uint64_t seed = 0;
};

/// Greedy-decodes every task and scores the completed programs. Exact
/// match and edit similarity compare the generated span to the target.
inline MetricsRecord evaluate_policy(const policy::PolicyParams& params, const std::vector<Task>& tasks,
                                     const EvalOptions& opt) {
  MetricsRecord m;
  m.n_eval = tasks.size();
  if (tasks.empty()) return m;
  struct Row {
    bool compiled = false;
    bool exact = false;
    double edit = 0, ast = 0, dfg = 0;
    std::vector<bool> passed;
  };
  std::vector<Row> rows(tasks.size());
  const auto ref = policy::freeze_reference(params);
  parallel_for(tasks.size(), [&](std::size_t i) {
    const Task& task = tasks[i];
    const TokenSeq gen = policy::decode_greedy(params, task.source, opt.max_len);
    const TokenSeq prog = task.program(gen);
    const auto s = reward::score_terminal(prog, *task.reference, task.mode);
    Row& r = rows[i];
    r.compiled = compiles(prog);
    r.exact = gen == task.target;
    r.edit = edit_similarity(gen, task.target);
    r.ast = s.r_ast;
    r.dfg = s.r_dfg;
    if (opt.pass_k > 0 && task.mode.kind() == reward::RewardMode::Kind::Functional) {
      for (int j = 0; j < opt.pass_k; ++j) {
        const auto tr = policy::sample_topk(params, ref, task.source, opt.top_k, opt.max_len,
                                            derive_seed(opt.seed, i, static_cast<std::uint64_t>(j)));
        r.passed.push_back(passes_all(task.program(tr.program()), task.mode.tests()));
      }
    }
  });

  std::vector<std::vector<bool>> flags;
  for (const auto& r : rows) {
    m.comp_rate += r.compiled;
    m.exact_match += r.exact;
    m.edit_sim += r.edit;
    m.ast_mean += r.ast;
    m.dfg_mean += r.dfg;
    if (!r.passed.empty()) flags.push_back(r.passed);
  }
  const double n = static_cast<double>(tasks.size());
  m.comp_rate /= n;
  m.exact_match /= n;
  m.edit_sim /= n;
  m.ast_mean /= n;
  m.dfg_mean /= n;
  if (!flags.empty())
    for (int k = 1; k <= opt.pass_k; ++k) m.pass_at_k[k] = pass_at_k(flags, k);
  return m;
}

}  // namespace rlcf::eval

#endif  // RLCF_EVAL_HPP
