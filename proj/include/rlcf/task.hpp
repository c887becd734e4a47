#ifndef RLCF_TASK_HPP
#define RLCF_TASK_HPP

#include <memory>
#include <stdexcept>
#include <vector>

#include "rlcf/reward.hpp"

namespace rlcf {

/// One (x, y) pair as the trainer sees it.
///
/// The policy conditions on `source` and generates `target`. Before
/// scoring, `program_prefix` is prepended to the generated tokens: for
/// completion this is the unmasked head of the program, for synthesis it
/// is empty.
struct Task {
  TokenSeq source;
  TokenSeq target;
  TokenSeq program_prefix;
  reward::RewardMode mode = reward::RewardMode::syntactic();
  std::shared_ptr<const reward::MatchReference> reference;

  TokenSeq program(const TokenSeq& generated) const {
    TokenSeq out = program_prefix;
    out.insert(out.end(), generated.begin(), generated.end());
    return out;
  }
  TokenSeq reference_program() const { return program(target); }
};

/// Completion: the last `mask_len` tokens are hidden and must be regenerated.
inline Task make_completion_task(const TokenSeq& program, int mask_len) {
  if (mask_len < 1 || static_cast<std::size_t>(mask_len) >= program.size())
    throw std::invalid_argument("completion task: mask_len must be in [1, program length)");
  Task t;
  const auto cut = program.end() - mask_len;
  t.source.assign(program.begin(), cut);
  t.target.assign(cut, program.end());
  t.program_prefix = t.source;
  t.reference = std::make_shared<const reward::MatchReference>(program);
  return t;
}

/// Synthesis: generate the whole program from a serialized prompt.
inline Task make_synthesis_task(TokenSeq prompt, const TokenSeq& program, std::vector<lang::UnitTest> tests) {
  Task t;
  t.source = std::move(prompt);
  t.target = program;
  t.mode = tests.empty() ? reward::RewardMode::syntactic() : reward::RewardMode::functional(std::move(tests));
  t.reference = std::make_shared<const reward::MatchReference>(program);
  return t;
}

}  // namespace rlcf

#endif  // RLCF_TASK_HPP
