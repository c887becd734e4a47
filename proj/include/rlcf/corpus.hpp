#ifndef RLCF_CORPUS_HPP
#define RLCF_CORPUS_HPP

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "rlcf/generator.hpp"
#include "rlcf/parallel.hpp"
#include "rlcf/policy.hpp"
#include "rlcf/task.hpp"

namespace rlcf::corpus {

using nlohmann::json;

enum class TaskKind { Completion, Synthesis };

inline const char* to_string(TaskKind k) { return k == TaskKind::Completion ? "completion" : "synthesis"; }

inline TaskKind parse_task_kind(const std::string& s) {
  if (s == "completion") return TaskKind::Completion;
  if (s == "synthesis") return TaskKind::Synthesis;
  throw std::invalid_argument("unknown task '" + s + "' (expected completion or synthesis)");
}

/// One JSONL line of a corpus file.
struct Record {
  std::string id;
  std::string source_text;
  std::string target_text;
  std::optional<std::vector<lang::UnitTest>> tests;
};

inline json to_json(const Record& r) {
  json j;
  j["id"] = r.id;
  j["source_text"] = r.source_text;
  j["target_text"] = r.target_text;
  if (r.tests) {
    json arr = json::array();
    for (const auto& t : *r.tests) {
      json in = json::object();
      for (const auto& [k, v] : t.inputs) in[k] = v;
      arr.push_back({{"inputs", in}, {"expected", t.expected}});
    }
    j["tests"] = std::move(arr);
  }
  return j;
}

inline std::vector<lang::UnitTest> tests_from_json(const json& arr) {
  if (!arr.is_array()) throw std::invalid_argument("\"tests\" must be an array");
  std::vector<lang::UnitTest> out;
  for (const auto& t : arr) {
    if (!t.is_object() || !t.contains("inputs") || !t.contains("expected"))
      throw std::invalid_argument("each test needs \"inputs\" and \"expected\"");
    lang::UnitTest u;
    for (const auto& [k, v] : t.at("inputs").items()) {
      const auto id = Vocabulary::lookup(k);
      if (!id || !Vocabulary::is_input(*id)) throw std::invalid_argument("test input '" + k + "' is not in x0..x3");
      u.inputs[k] = v.get<std::int64_t>();
    }
    u.expected = t.at("expected").get<std::int64_t>();
    out.push_back(std::move(u));
  }
  return out;
}

inline Record record_from_json(const json& j) {
  Record r;
  const auto& id = j.at("id");
  r.id = id.is_string() ? id.get<std::string>() : id.dump();
  r.source_text = j.at("source_text").get<std::string>();
  r.target_text = j.at("target_text").get<std::string>();
  if (j.contains("tests")) r.tests = tests_from_json(j.at("tests"));
  return r;
}

inline std::vector<Record> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus '" + path + "'");
  std::vector<Record> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline std::string to_jsonl(const std::vector<Record>& records) {
  std::string out;
  for (const auto& r : records) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Prompt serialization for synthesis

inline void append_number(TokenSeq& out, std::int64_t v) {
  if (v < 0) out.push_back(Vocabulary::kMinus);
  const std::uint64_t mag = v < 0 ? 0ULL - static_cast<std::uint64_t>(v) : static_cast<std::uint64_t>(v);
  for (char d : std::to_string(mag)) out.push_back(Vocabulary::digit(d - '0'));
}

/// Unit tests as tokens: for each test the input values in name order,
/// then '=', the expected value and ';'. Example: "3 4 = 1 2 ;".
inline TokenSeq serialize_tests(const std::vector<lang::UnitTest>& tests) {
  TokenSeq out;
  for (const auto& t : tests) {
    for (const auto& [name, v] : t.inputs) append_number(out, v);
    out.push_back(Vocabulary::kAssign);
    append_number(out, t.expected);
    out.push_back(Vocabulary::kSemi);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Generation

struct CorpusSpec {
  TaskKind task = TaskKind::Completion;
  int count = 500;
  int mask_len = 25;
  int min_tokens = 0;  // completion: programs shorter than mask_len + max(min_tokens, 1) are redrawn
  int max_tokens = 0;  // 0 means unbounded
  int tests_per_problem = 3;
  int input_max = 9;   // test inputs are drawn from [0, input_max]
  lang::GenConfig gen{};
};

namespace detail {

inline std::string record_id(TaskKind k, int i) {
  std::ostringstream os;
  os << (k == TaskKind::Completion ? "cmp-" : "syn-");
  os.width(6);
  os.fill('0');
  os << i;
  return os.str();
}

}  // namespace detail

/// Deterministic corpus. Each record draws from its own seed stream, so a
/// record does not depend on how many candidates earlier records rejected.
inline std::vector<Record> generate_corpus(std::uint64_t seed, const CorpusSpec& spec) {
  if (spec.count < 1) throw std::invalid_argument("corpus count must be >= 1");
  std::vector<Record> out;
  out.reserve(static_cast<std::size_t>(spec.count));
  for (int i = 0; i < spec.count; ++i) {
    for (std::uint64_t attempt = 0;; ++attempt) {
      if (attempt > 100000) throw std::runtime_error("generator cannot satisfy the corpus constraints");
      const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(i), attempt);
      auto prog = lang::gen_program(s, spec.gen);
      const auto n = static_cast<int>(prog.tokens.size());
      if (spec.max_tokens > 0 && n > spec.max_tokens) continue;
      Record r;
      r.id = detail::record_id(spec.task, i);
      if (spec.task == TaskKind::Completion) {
        if (n < spec.mask_len + std::max(spec.min_tokens, 1)) continue;
        const TokenSeq head(prog.tokens.begin(), prog.tokens.end() - spec.mask_len);
        const TokenSeq tail(prog.tokens.end() - spec.mask_len, prog.tokens.end());
        r.source_text = detokenize(head);
        r.target_text = detokenize(tail);
      } else {
        if (spec.min_tokens > 0 && n < spec.min_tokens) continue;
        std::mt19937_64 rng(mix_seed(s));
        std::vector<lang::UnitTest> tests;
        bool ok = true;
        for (int k = 0; k < spec.tests_per_problem && ok; ++k) {
          lang::UnitTest t;
          for (int x = 0; x < spec.gen.allowed_inputs; ++x)
            t.inputs["x" + std::to_string(x)] = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(spec.input_max + 1));
          const auto res = lang::run(prog.tree, t.inputs);
          if (const auto* v = std::get_if<std::int64_t>(&res)) {
            t.expected = *v;
            tests.push_back(std::move(t));
          } else {
            ok = false;
          }
        }
        if (!ok) continue;
        r.source_text = detokenize(serialize_tests(tests));
        r.target_text = detokenize(prog.tokens);
        r.tests = std::move(tests);
      }
      out.push_back(std::move(r));
      break;
    }
  }
  return out;
}

/// Builds trainer tasks. Completion records are re-split with `mask_len`.
inline std::vector<Task> to_tasks(const std::vector<Record>& records, TaskKind kind, int mask_len) {
  std::vector<Task> tasks;
  tasks.reserve(records.size());
  for (const auto& r : records) {
    const TokenSeq src = tokenize(r.source_text);
    const TokenSeq tgt = tokenize(r.target_text);
    if (kind == TaskKind::Completion) {
      TokenSeq prog = src;
      prog.insert(prog.end(), tgt.begin(), tgt.end());
      tasks.push_back(make_completion_task(prog, mask_len));
    } else {
      tasks.push_back(make_synthesis_task(src, tgt, r.tests.value_or(std::vector<lang::UnitTest>{})));
    }
  }
  return tasks;
}

inline std::vector<policy::Example> to_examples(const std::vector<Task>& tasks) {
  std::vector<policy::Example> out;
  out.reserve(tasks.size());
  for (const auto& t : tasks) out.push_back({t.source, t.target});
  return out;
}

}  // namespace rlcf::corpus

#endif  // RLCF_CORPUS_HPP
