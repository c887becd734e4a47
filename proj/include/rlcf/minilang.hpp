#ifndef RLCF_MINILANG_HPP
#define RLCF_MINILANG_HPP

#include <climits>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "rlcf/vocab.hpp"

namespace rlcf::lang {

enum class NodeKind { Program, Assign, Return, BinOp, Num, Var };

struct AstNode {
  NodeKind kind;
  TokenId label = 0;  // identifier, digit or operator token; 0 otherwise
  int parent = -1;
  std::vector<int> children;
  int pos = -1;  // first source token, -1 for synthesized trees
};

/// Syntax tree stored in preorder: node 0 is the Program root and every
/// node's children have larger indices than the node itself.
class AstTree {
 public:
  AstTree() = default;
  explicit AstTree(std::vector<AstNode> nodes) : nodes_(std::move(nodes)) {}

  const std::vector<AstNode>& nodes() const noexcept { return nodes_; }
  const AstNode& node(int i) const { return nodes_.at(static_cast<std::size_t>(i)); }
  const AstNode& root() const { return nodes_.front(); }
  std::size_t size() const noexcept { return nodes_.size(); }
  const std::vector<int>& statements() const { return root().children; }

  /// Structural equality; source positions are ignored.
  friend bool operator==(const AstTree& a, const AstTree& b) {
    if (a.nodes_.size() != b.nodes_.size()) return false;
    for (std::size_t i = 0; i < a.nodes_.size(); ++i) {
      const auto& x = a.nodes_[i];
      const auto& y = b.nodes_[i];
      if (x.kind != y.kind || x.label != y.label || x.parent != y.parent ||
          x.children != y.children)
        return false;
    }
    return true;
  }

 private:
  std::vector<AstNode> nodes_;
};

/// Incrementally builds a tree in any order and renumbers it to preorder.
class TreeBuilder {
 public:
  int add(NodeKind kind, TokenId label, std::vector<int> children, int pos = -1) {
    nodes_.push_back({kind, label, -1, std::move(children), pos});
    return static_cast<int>(nodes_.size()) - 1;
  }

  AstTree finish(int root) && {
    std::vector<AstNode> out;
    out.reserve(nodes_.size());
    emit(root, -1, out);
    return AstTree(std::move(out));
  }

 private:
  int emit(int src, int parent, std::vector<AstNode>& out) {
    const int id = static_cast<int>(out.size());
    const AstNode& from = nodes_[static_cast<std::size_t>(src)];
    out.push_back({from.kind, from.label, parent, {}, from.pos});
    std::vector<int> kids;
    kids.reserve(from.children.size());
    for (int c : from.children) kids.push_back(emit(c, id, out));
    out[static_cast<std::size_t>(id)].children = std::move(kids);
    return id;
  }

  std::vector<AstNode> nodes_;
};

enum class CompileStatus { Ok, ParseError, StaticError };

struct CompileReport {
  CompileStatus status = CompileStatus::Ok;
  std::string message;
  int location = -1;

  bool ok() const noexcept { return status == CompileStatus::Ok; }
};

inline const char* to_string(CompileStatus s) {
  switch (s) {
    case CompileStatus::Ok: return "ok";
    case CompileStatus::ParseError: return "parse-error";
    case CompileStatus::StaticError: return "static-error";
  }
  return "?";
}

struct ParseResult {
  std::optional<AstTree> tree;
  CompileReport report;
};

namespace detail {

class Parser {
 public:
  explicit Parser(const TokenSeq& toks) : toks_(toks) {}

  ParseResult run() {
    std::vector<int> stmts;
    while (at_ < toks_.size() && !failed_) stmts.push_back(statement());
    if (!failed_ && stmts.empty()) fail("expected a statement");
    if (failed_) return {std::nullopt, {CompileStatus::ParseError, message_, error_at_}};
    const int root = builder_.add(NodeKind::Program, 0, std::move(stmts), 0);
    return {std::move(builder_).finish(root), {}};
  }

 private:
  bool peek(TokenId id) const { return at_ < toks_.size() && toks_[at_] == id; }

  void fail(std::string what) {
    if (failed_) return;
    failed_ = true;
    error_at_ = static_cast<int>(at_);
    message_ = what + " at token " + std::to_string(at_);
    if (at_ < toks_.size())
      message_ += " ('" + std::string(Vocabulary::surface(toks_[at_])) + "')";
    else
      message_ += " (end of input)";
  }

  void expect(TokenId id) {
    if (failed_) return;
    if (!peek(id)) {
      fail("expected '" + std::string(Vocabulary::surface(id)) + "'");
      return;
    }
    ++at_;
  }

  int statement() {
    const int pos = static_cast<int>(at_);
    if (peek(Vocabulary::kReturn)) {
      ++at_;
      const int e = expr();
      expect(Vocabulary::kSemi);
      return builder_.add(NodeKind::Return, 0, {e}, pos);
    }
    if (at_ < toks_.size() && Vocabulary::is_ident(toks_[at_])) {
      const int target = builder_.add(NodeKind::Var, toks_[at_], {}, pos);
      ++at_;
      expect(Vocabulary::kAssign);
      const int e = expr();
      expect(Vocabulary::kSemi);
      return builder_.add(NodeKind::Assign, 0, {target, e}, pos);
    }
    fail("expected a statement");
    return -1;
  }

  int expr() {
    int lhs = term();
    while (!failed_ && (peek(Vocabulary::kPlus) || peek(Vocabulary::kMinus))) {
      const TokenId op = toks_[at_];
      const int pos = static_cast<int>(at_++);
      const int rhs = term();
      lhs = builder_.add(NodeKind::BinOp, op, {lhs, rhs}, pos);
    }
    return lhs;
  }

  int term() {
    int lhs = factor();
    while (!failed_ && (peek(Vocabulary::kStar) || peek(Vocabulary::kSlash))) {
      const TokenId op = toks_[at_];
      const int pos = static_cast<int>(at_++);
      const int rhs = factor();
      lhs = builder_.add(NodeKind::BinOp, op, {lhs, rhs}, pos);
    }
    return lhs;
  }

  int factor() {
    if (failed_) return -1;
    if (at_ >= toks_.size()) {
      fail("expected an expression");
      return -1;
    }
    const TokenId tok = toks_[at_];
    const int pos = static_cast<int>(at_);
    if (Vocabulary::is_digit(tok)) {
      ++at_;
      return builder_.add(NodeKind::Num, tok, {}, pos);
    }
    if (Vocabulary::is_ident(tok)) {
      ++at_;
      return builder_.add(NodeKind::Var, tok, {}, pos);
    }
    if (tok == Vocabulary::kLParen) {
      ++at_;
      const int e = expr();
      expect(Vocabulary::kRParen);
      return e;
    }
    fail("expected an expression");
    return -1;
  }

  const TokenSeq& toks_;
  std::size_t at_ = 0;
  TreeBuilder builder_;
  bool failed_ = false;
  int error_at_ = -1;
  std::string message_;
};

}  // namespace detail

/// Recursive-descent parse. A single trailing EOS is stripped; any other
/// control token is a parse error at its index.
inline ParseResult parse(TokenSeq tokens) {
  if (!tokens.empty() && tokens.back() == Vocabulary::kEos) tokens.pop_back();
  return detail::Parser(tokens).run();
}

/// Checks return placement and def-before-use.
inline CompileReport static_check(const AstTree& tree) {
  const auto& stmts = tree.statements();
  if (stmts.empty())
    return {CompileStatus::StaticError, "missing-return: program has no statements", 0};
  std::vector<bool> defined(Vocabulary::size(), false);
  for (int i = 0; i < 4; ++i) defined[Vocabulary::input(i)] = true;

  for (std::size_t s = 0; s < stmts.size(); ++s) {
    const AstNode& stmt = tree.node(stmts[s]);
    const bool last = s + 1 == stmts.size();
    if (stmt.kind == NodeKind::Return && !last)
      return {CompileStatus::StaticError,
              "multiple-return: return before the final statement", stmt.pos};
    if (last && stmt.kind != NodeKind::Return)
      return {CompileStatus::StaticError,
              "missing-return: final statement is not a return", stmt.pos};

    const int expr_root = stmt.kind == NodeKind::Assign ? stmt.children[1] : stmt.children[0];
    std::vector<int> stack{expr_root};
    while (!stack.empty()) {
      const AstNode& n = tree.node(stack.back());
      stack.pop_back();
      if (n.kind == NodeKind::Var && !defined[n.label])
        return {CompileStatus::StaticError,
                "def-before-use: '" + std::string(Vocabulary::surface(n.label)) +
                    "' read before assignment",
                n.pos};
      for (int c : n.children) stack.push_back(c);
    }
    if (stmt.kind == NodeKind::Assign) defined[tree.node(stmt.children[0]).label] = true;
  }
  return {};
}

struct CompileResult {
  std::optional<AstTree> tree;  // present only when report.ok()
  CompileReport report;
};

/// parse + static_check in one step.
inline CompileResult compile(const TokenSeq& tokens) {
  auto parsed = parse(tokens);
  if (!parsed.tree) return {std::nullopt, std::move(parsed.report)};
  auto report = static_check(*parsed.tree);
  if (!report.ok()) return {std::nullopt, std::move(report)};
  return {std::move(parsed.tree), {}};
}

// ---------------------------------------------------------------------------
// Interpreter

using Inputs = std::map<std::string, std::int64_t>;

enum class RuntimeErrorKind { DivisionByZero, Overflow, UnboundInput };

struct RuntimeError {
  RuntimeErrorKind kind;
  std::string message;
};

using RunResult = std::variant<std::int64_t, RuntimeError>;

namespace detail {

struct Evaluator {
  const AstTree& tree;
  std::vector<std::optional<std::int64_t>> env;
  std::optional<RuntimeError> error;

  std::int64_t eval(int id) {
    const AstNode& n = tree.node(id);
    switch (n.kind) {
      case NodeKind::Num: return Vocabulary::digit_value(n.label);
      case NodeKind::Var: {
        if (!env[n.label]) {
          raise(RuntimeErrorKind::UnboundInput,
                "unbound input '" + std::string(Vocabulary::surface(n.label)) + "'");
          return 0;
        }
        return *env[n.label];
      }
      case NodeKind::BinOp: {
        const std::int64_t l = eval(n.children[0]);
        if (error) return 0;
        const std::int64_t r = eval(n.children[1]);
        if (error) return 0;
        std::int64_t out = 0;
        bool overflow = false;
        switch (n.label) {
          case Vocabulary::kPlus: overflow = __builtin_add_overflow(l, r, &out); break;
          case Vocabulary::kMinus: overflow = __builtin_sub_overflow(l, r, &out); break;
          case Vocabulary::kStar: overflow = __builtin_mul_overflow(l, r, &out); break;
          case Vocabulary::kSlash:
            if (r == 0) {
              raise(RuntimeErrorKind::DivisionByZero, "division by zero");
              return 0;
            }
            if (l == INT64_MIN && r == -1) {
              overflow = true;
              break;
            }
            out = l / r;
            break;
          default: throw std::logic_error("bad operator label");
        }
        if (overflow) raise(RuntimeErrorKind::Overflow, "integer overflow");
        return out;
      }
      default: throw std::logic_error("eval on a non-expression node");
    }
  }

  void raise(RuntimeErrorKind kind, std::string msg) {
    if (!error) error = RuntimeError{kind, std::move(msg)};
  }
};

}  // namespace detail

/// Evaluates a checked program. Integer division truncates toward zero;
/// 64-bit overflow is reported, never wrapped.
inline RunResult run(const AstTree& tree, const Inputs& inputs) {
  detail::Evaluator ev{tree, std::vector<std::optional<std::int64_t>>(Vocabulary::size()), {}};
  for (const auto& [name, value] : inputs) {
    auto id = Vocabulary::lookup(name);
    if (!id || !Vocabulary::is_input(*id))
      throw std::invalid_argument("'" + name + "' is not an input name");
    ev.env[*id] = value;
  }
  for (int s : tree.statements()) {
    const AstNode& stmt = tree.node(s);
    if (stmt.kind == NodeKind::Return) {
      const auto v = ev.eval(stmt.children[0]);
      if (ev.error) return *ev.error;
      return v;
    }
    const auto v = ev.eval(stmt.children[1]);
    if (ev.error) return *ev.error;
    ev.env[tree.node(stmt.children[0]).label] = v;
  }
  throw std::invalid_argument("run: program has no return statement");
}

struct UnitTest {
  Inputs inputs;
  std::int64_t expected = 0;
};

enum class TestOutcome { AllPassed, FailedTest, RuntimeError };

inline TestOutcome run_tests(const AstTree& tree, const std::vector<UnitTest>& tests) {
  bool failed = false;
  for (const auto& t : tests) {
    const auto r = run(tree, t.inputs);
    if (std::holds_alternative<RuntimeError>(r)) return TestOutcome::RuntimeError;
    if (std::get<std::int64_t>(r) != t.expected) failed = true;
  }
  return failed ? TestOutcome::FailedTest : TestOutcome::AllPassed;
}

// ---------------------------------------------------------------------------
// Structure extraction

/// One canonical fingerprint per node, indexed by preorder position. Equal
/// strings mean structurally identical subtrees, labels included.
inline std::vector<std::string> extract_subtrees(const AstTree& tree) {
  std::vector<std::string> fp(tree.size());
  for (std::size_t i = tree.size(); i-- > 0;) {
    const AstNode& n = tree.node(static_cast<int>(i));
    std::string s;
    switch (n.kind) {
      case NodeKind::Program: s = "P"; break;
      case NodeKind::Assign: s = "A"; break;
      case NodeKind::Return: s = "R"; break;
      case NodeKind::BinOp: s = "B"; s += Vocabulary::surface(n.label); break;
      case NodeKind::Num: s = "N"; s += Vocabulary::surface(n.label); break;
      case NodeKind::Var: s = "V"; s += Vocabulary::surface(n.label); break;
    }
    if (!n.children.empty()) {
      s += '(';
      for (std::size_t c = 0; c < n.children.size(); ++c) {
        if (c) s += ',';
        s += fp[static_cast<std::size_t>(n.children[c])];
      }
      s += ')';
    }
    fp[i] = std::move(s);
  }
  return fp;
}

inline constexpr const char* kReturnSink = "return";

struct DfgEdge {
  std::string source;
  std::string target;  // variable name or kReturnSink
  friend bool operator==(const DfgEdge&, const DfgEdge&) = default;
  friend auto operator<=>(const DfgEdge&, const DfgEdge&) = default;
};

/// Data-flow edges in statement order. Within one statement, edges follow
/// the left-to-right order of variable reads; duplicates are kept.
struct Dfg {
  std::vector<DfgEdge> edges;
};

inline Dfg extract_dfg(const AstTree& tree) {
  if (const auto report = static_check(tree); !report.ok())
    throw std::invalid_argument("extract_dfg: " + report.message);
  Dfg dfg;
  for (int s : tree.statements()) {
    const AstNode& stmt = tree.node(s);
    const bool assign = stmt.kind == NodeKind::Assign;
    const std::string target = assign
                                   ? std::string(Vocabulary::surface(tree.node(stmt.children[0]).label))
                                   : std::string(kReturnSink);
    const int root = assign ? stmt.children[1] : stmt.children[0];
    std::vector<int> stack{root};
    while (!stack.empty()) {
      const AstNode& n = tree.node(stack.back());
      stack.pop_back();
      if (n.kind == NodeKind::Var)
        dfg.edges.push_back({std::string(Vocabulary::surface(n.label)), target});
      for (auto it = n.children.rbegin(); it != n.children.rend(); ++it) stack.push_back(*it);
    }
  }
  return dfg;
}

// ---------------------------------------------------------------------------
// Printing

namespace detail {

inline int precedence(TokenId op) {
  return op == Vocabulary::kStar || op == Vocabulary::kSlash ? 2 : 1;
}

inline void print_expr(const AstTree& tree, int id, TokenSeq& out) {
  const AstNode& n = tree.node(id);
  if (n.kind != NodeKind::BinOp) {
    out.push_back(n.label);
    return;
  }
  const int prec = precedence(n.label);
  auto child = [&](int c, bool right) {
    const AstNode& k = tree.node(c);
    // Left-associative: a right operand of equal precedence needs parens.
    const bool paren = k.kind == NodeKind::BinOp &&
                       (precedence(k.label) < prec || (right && precedence(k.label) == prec));
    if (paren) out.push_back(Vocabulary::kLParen);
    print_expr(tree, c, out);
    if (paren) out.push_back(Vocabulary::kRParen);
  };
  child(n.children[0], false);
  out.push_back(n.label);
  child(n.children[1], true);
}

}  // namespace detail

/// Renders a tree back to tokens using the fewest parentheses that
/// reproduce the same tree when parsed.
inline TokenSeq print(const AstTree& tree) {
  TokenSeq out;
  for (int s : tree.statements()) {
    const AstNode& stmt = tree.node(s);
    if (stmt.kind == NodeKind::Return) {
      out.push_back(Vocabulary::kReturn);
      detail::print_expr(tree, stmt.children[0], out);
    } else {
      out.push_back(tree.node(stmt.children[0]).label);
      out.push_back(Vocabulary::kAssign);
      detail::print_expr(tree, stmt.children[1], out);
    }
    out.push_back(Vocabulary::kSemi);
  }
  return out;
}

}  // namespace rlcf::lang

#endif  // RLCF_MINILANG_HPP
