#ifndef RLCF_GENERATOR_HPP
#define RLCF_GENERATOR_HPP

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "rlcf/minilang.hpp"

namespace rlcf::lang {

struct GenConfig {
  int min_stmts = 1;
  int max_stmts = 4;
  int max_expr_depth = 2;
  int allowed_inputs = 2;  // programs may read x0 .. x{allowed_inputs-1}
};

struct GeneratedProgram {
  TokenSeq tokens;
  AstTree tree;
};

namespace detail {

class ProgramGen {
 public:
  ProgramGen(std::uint64_t seed, const GenConfig& cfg) : rng_(seed), cfg_(cfg) {}

  GeneratedProgram generate() {
    const int n = cfg_.min_stmts + draw(cfg_.max_stmts - cfg_.min_stmts + 1);
    std::vector<TokenId> defined;
    for (int i = 0; i < cfg_.allowed_inputs; ++i) defined.push_back(Vocabulary::input(i));

    static constexpr TokenId kLocals[] = {Vocabulary::kFirstIdent + 4, Vocabulary::kFirstIdent + 5,
                                          Vocabulary::kFirstIdent + 6, Vocabulary::kFirstIdent + 7};
    std::vector<int> stmts;
    for (int i = 0; i + 1 < n; ++i) {
      const TokenId target = kLocals[draw(4)];
      const int e = expr(cfg_.max_expr_depth, defined);
      const int v = b_.add(NodeKind::Var, target, {});
      stmts.push_back(b_.add(NodeKind::Assign, 0, {v, e}));
      bool seen = false;
      for (auto d : defined) seen |= d == target;
      if (!seen) defined.push_back(target);
    }
    const int e = expr(cfg_.max_expr_depth, defined);
    stmts.push_back(b_.add(NodeKind::Return, 0, {e}));
    const int root = b_.add(NodeKind::Program, 0, std::move(stmts));
    AstTree tree = std::move(b_).finish(root);
    TokenSeq tokens = print(tree);
    return {std::move(tokens), std::move(tree)};
  }

 private:
  int draw(int n) { return static_cast<int>(rng_() % static_cast<std::uint64_t>(n)); }

  int expr(int depth, const std::vector<TokenId>& defined) {
    if (depth == 0 || draw(10) < 4) {
      if (!defined.empty() && draw(2) == 0)
        return b_.add(NodeKind::Var, defined[static_cast<std::size_t>(draw(static_cast<int>(defined.size())))], {});
      return b_.add(NodeKind::Num, Vocabulary::digit(draw(10)), {});
    }
    static constexpr TokenId kOps[] = {Vocabulary::kPlus, Vocabulary::kMinus, Vocabulary::kStar,
                                       Vocabulary::kSlash};
    const TokenId op = kOps[draw(4)];
    const int l = expr(depth - 1, defined);
    const int r = expr(depth - 1, defined);
    return b_.add(NodeKind::BinOp, op, {l, r});
  }

  std::mt19937_64 rng_;
  GenConfig cfg_;
  TreeBuilder b_;
};

}  // namespace detail

/// Grammar-directed random program. The result always passes static_check,
/// and the same (seed, config) yields the same program.
inline GeneratedProgram gen_program(std::uint64_t seed, const GenConfig& cfg) {
  if (cfg.min_stmts < 1 || cfg.max_stmts < cfg.min_stmts || cfg.max_expr_depth < 0 ||
      cfg.allowed_inputs < 0 || cfg.allowed_inputs > 4)
    throw std::invalid_argument("gen_program: invalid generator bounds");
  return detail::ProgramGen(seed, cfg).generate();
}

}  // namespace rlcf::lang

#endif  // RLCF_GENERATOR_HPP
