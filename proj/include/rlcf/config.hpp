#ifndef RLCF_CONFIG_HPP
#define RLCF_CONFIG_HPP

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rlcf/corpus.hpp"
#include "rlcf/policy.hpp"
#include "rlcf/ppo.hpp"

namespace rlcf::config {

/// Everything a `train` run needs.
struct RunConfig {
  corpus::TaskKind task = corpus::TaskKind::Completion;
  int mask_len = 25;
  std::string corpus;
  std::string pretrain_corpus;  // empty: pretrain on `corpus`
  std::string eval_corpus;      // empty: evaluate on `corpus`
  std::string checkpoint_dir = "checkpoints";
  std::string metrics = "metrics.jsonl";
  int mle_epochs = 10;
  double mle_lr = 3e-3;
  int eval_every = 1;
  int pass_k = 0;
  std::uint64_t seed = 1;
  policy::PolicyShape model{};
  ppo::PpoConfig ppo{};
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> errors)
      : std::runtime_error(join(errors)), errors_(std::move(errors)) {}
  const std::vector<std::string>& errors() const noexcept { return errors_; }

 private:
  static std::string join(const std::vector<std::string>& e) {
    std::string s = "invalid configuration:";
    for (const auto& x : e) s += "\n  - " + x;
    return s;
  }
  std::vector<std::string> errors_;
};

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string fmt_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <typename T>
bool parse_number(const std::string& s, T& out) {
  const char* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, out);
  return r.ec == std::errc() && r.ptr == end;
}

inline bool parse_bool(const std::string& s, bool& out) {
  if (s == "true" || s == "1") return out = true, true;
  if (s == "false" || s == "0") return out = false, true;
  return false;
}

inline std::string terms_to_string(const reward::RewardTerms& t) {
  std::string s;
  auto add = [&](bool on, const char* n) {
    if (!on) return;
    if (!s.empty()) s += ',';
    s += n;
  };
  add(t.compile, "cs");
  add(t.ast, "ast");
  add(t.dfg, "dfg");
  return s.empty() ? "none" : s;
}

inline bool parse_terms(const std::string& s, reward::RewardTerms& t) {
  t = {false, false, false};
  if (s == "none") return true;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item == "cs") t.compile = true;
    else if (item == "ast") t.ast = true;
    else if (item == "dfg") t.dfg = true;
    else return false;
  }
  return true;
}

/// Binds one "section.key" to a RunConfig field in both directions.
struct Field {
  std::string section;
  std::string key;
  std::function<bool(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field number(std::string sec, std::string key, T RunConfig::*member) {
  return {sec, key,
          [member](RunConfig& c, const std::string& v) { return parse_number(v, c.*member); },
          [member](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return fmt_double(c.*member);
            else return std::to_string(c.*member);
          }};
}

template <typename Sub, typename T>
Field nested(std::string sec, std::string key, Sub RunConfig::*outer, T Sub::*member) {
  return {sec, key,
          [=](RunConfig& c, const std::string& v) { return parse_number(v, c.*outer.*member); },
          [=](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return fmt_double(c.*outer.*member);
            else return std::to_string(c.*outer.*member);
          }};
}

inline Field text(std::string sec, std::string key, std::string RunConfig::*member) {
  return {sec, key,
          [member](RunConfig& c, const std::string& v) { return c.*member = v, true; },
          [member](const RunConfig& c) { return c.*member; }};
}

inline const std::vector<Field>& fields() {
  static const std::vector<Field> f = [] {
    std::vector<Field> v;
    v.push_back({"run", "task",
                 [](RunConfig& c, const std::string& s) {
                   if (s != "completion" && s != "synthesis") return false;
                   c.task = corpus::parse_task_kind(s);
                   return true;
                 },
                 [](const RunConfig& c) { return std::string(corpus::to_string(c.task)); }});
    v.push_back(number("run", "mask_len", &RunConfig::mask_len));
    v.push_back(text("run", "corpus", &RunConfig::corpus));
    v.push_back(text("run", "pretrain_corpus", &RunConfig::pretrain_corpus));
    v.push_back(text("run", "eval_corpus", &RunConfig::eval_corpus));
    v.push_back(text("run", "checkpoint_dir", &RunConfig::checkpoint_dir));
    v.push_back(text("run", "metrics", &RunConfig::metrics));
    v.push_back(number("run", "mle_epochs", &RunConfig::mle_epochs));
    v.push_back(number("run", "mle_lr", &RunConfig::mle_lr));
    v.push_back(number("run", "eval_every", &RunConfig::eval_every));
    v.push_back(number("run", "pass_k", &RunConfig::pass_k));
    v.push_back(number("run", "seed", &RunConfig::seed));

    v.push_back(nested("model", "embed", &RunConfig::model, &policy::PolicyShape::embed));
    v.push_back(nested("model", "window", &RunConfig::model, &policy::PolicyShape::window));
    v.push_back(nested("model", "hidden", &RunConfig::model, &policy::PolicyShape::hidden));

    using P = ppo::PpoConfig;
    v.push_back(nested("ppo", "gamma", &RunConfig::ppo, &P::gamma));
    v.push_back(nested("ppo", "beta", &RunConfig::ppo, &P::beta));
    v.push_back(nested("ppo", "epsilon", &RunConfig::ppo, &P::epsilon));
    v.push_back(nested("ppo", "alpha", &RunConfig::ppo, &P::alpha));
    v.push_back(nested("ppo", "top_k", &RunConfig::ppo, &P::top_k));
    v.push_back(nested("ppo", "num_samples", &RunConfig::ppo, &P::num_samples));
    v.push_back(nested("ppo", "ppo_epochs", &RunConfig::ppo, &P::ppo_epochs));
    v.push_back(nested("ppo", "epochs", &RunConfig::ppo, &P::epochs));
    v.push_back(nested("ppo", "max_len", &RunConfig::ppo, &P::max_len));
    v.push_back(nested("ppo", "weight_decay", &RunConfig::ppo, &P::weight_decay));
    v.push_back({"ppo", "lr",
                 [](RunConfig& c, const std::string& s) { return parse_number(s, c.ppo.lr.lr); },
                 [](const RunConfig& c) { return fmt_double(c.ppo.lr.lr); }});
    v.push_back({"ppo", "lr_schedule",
                 [](RunConfig& c, const std::string& s) {
                   if (s == "constant") c.ppo.lr.schedule = LrSchedule::Constant;
                   else if (s == "warmup_inv_sqrt") c.ppo.lr.schedule = LrSchedule::WarmupInvSqrt;
                   else return false;
                   return true;
                 },
                 [](const RunConfig& c) {
                   return std::string(c.ppo.lr.schedule == LrSchedule::Constant ? "constant" : "warmup_inv_sqrt");
                 }});
    v.push_back({"ppo", "warmup_init",
                 [](RunConfig& c, const std::string& s) { return parse_number(s, c.ppo.lr.warmup_init); },
                 [](const RunConfig& c) { return fmt_double(c.ppo.lr.warmup_init); }});
    v.push_back({"ppo", "warmup_steps",
                 [](RunConfig& c, const std::string& s) { return parse_number(s, c.ppo.lr.warmup_steps); },
                 [](const RunConfig& c) { return std::to_string(c.ppo.lr.warmup_steps); }});
    v.push_back({"ppo", "sum_over_time",
                 [](RunConfig& c, const std::string& s) { return parse_bool(s, c.ppo.sum_over_time); },
                 [](const RunConfig& c) { return std::string(c.ppo.sum_over_time ? "true" : "false"); }});
    v.push_back({"ppo", "reward_terms",
                 [](RunConfig& c, const std::string& s) { return parse_terms(s, c.ppo.terms); },
                 [](const RunConfig& c) { return terms_to_string(c.ppo.terms); }});
    return v;
  }();
  return f;
}

}  // namespace detail

/// Semantic checks that do not touch the filesystem.
inline std::vector<std::string> validate(const RunConfig& c) {
  std::vector<std::string> errs;
  if (c.corpus.empty()) errs.emplace_back("run.corpus is required");
  if (c.mask_len < 1) errs.emplace_back("run.mask_len must be >= 1");
  if (c.mle_epochs < 0) errs.emplace_back("run.mle_epochs must be >= 0");
  if (!(c.mle_lr > 0.0)) errs.emplace_back("run.mle_lr must be > 0");
  if (c.eval_every < 1) errs.emplace_back("run.eval_every must be >= 1");
  if (c.pass_k < 0) errs.emplace_back("run.pass_k must be >= 0");
  if (c.metrics.empty()) errs.emplace_back("run.metrics must not be empty");
  if (c.checkpoint_dir.empty()) errs.emplace_back("run.checkpoint_dir must not be empty");
  if (c.model.embed < 1 || c.model.window < 1 || c.model.hidden < 1)
    errs.emplace_back("model dimensions must be >= 1");
  for (auto& e : c.ppo.validate()) errs.push_back("ppo." + e);
  return errs;
}

/// Parses the sectioned key = value format without semantic checks.
/// Syntax errors, unknown sections or keys and malformed values are
/// appended to `errs`; parsing continues past each one.
inline RunConfig parse(const std::string& text, std::vector<std::string>& errs) {
  RunConfig c;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    line = detail::trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        errs.push_back(where + "malformed section header");
        continue;
      }
      section = detail::trim(line.substr(1, line.size() - 2));
      if (section != "run" && section != "model" && section != "ppo")
        errs.push_back(where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errs.push_back(where + "expected key = value");
      continue;
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    const detail::Field* field = nullptr;
    for (const auto& f : detail::fields())
      if (f.section == section && f.key == key) field = &f;
    if (!field) {
      errs.push_back(where + "unknown key '" + key + "' in [" + section + "]");
      continue;
    }
    if (!field->set(c, value)) errs.push_back(where + "bad value for " + section + "." + key + ": '" + value + "'");
  }
  return c;
}

/// Parses and validates; every problem is reported in one ConfigError.
inline RunConfig parse(const std::string& text) {
  std::vector<std::string> errs;
  RunConfig c = parse(text, errs);
  for (auto& e : validate(c)) errs.push_back(std::move(e));
  if (!errs.empty()) throw ConfigError(std::move(errs));
  return c;
}

/// Canonical form: every key, sections in fixed order.
inline std::string dump(const RunConfig& c) {
  std::string out, section;
  for (const auto& f : detail::fields()) {
    if (f.section != section) {
      if (!section.empty()) out += '\n';
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += f.key + " = " + f.get(c) + "\n";
  }
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot read config file '" + path + "'"});
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline RunConfig load(const std::string& path) { return parse(read_file(path)); }

/// Hash of every setting that shapes the training trajectory. Output
/// locations, the epoch budget and eval settings are excluded so a run
/// can be resumed with a larger budget or into a different directory.
inline std::uint64_t training_hash(const RunConfig& c) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& f : detail::fields()) {
    if (f.key == "checkpoint_dir" || f.key == "metrics" || f.key == "epochs" || f.key == "eval_every" ||
        f.key == "pass_k") continue;
    for (char ch : f.section + "." + f.key + "=" + f.get(c) + "\n") {
      h ^= static_cast<unsigned char>(ch);
      h *= 1099511628211ULL;
    }
  }
  return h;
}

}  // namespace rlcf::config

#endif  // RLCF_CONFIG_HPP
