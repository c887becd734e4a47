#ifndef RLCF_COMMANDS_HPP
#define RLCF_COMMANDS_HPP

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <unistd.h>

#include "rlcf/checkpoint.hpp"
#include "rlcf/config.hpp"
#include "rlcf/corpus.hpp"
#include "rlcf/eval.hpp"
#include "rlcf/external.hpp"
#include "rlcf/ppo.hpp"

namespace rlcf::cli {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

// Process exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFail = 1;   // negative verdict (score, compile-check)
inline constexpr int kExitUsage = 2;  // configuration, usage or input error

/// Command-line values that take precedence over the config file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> beta;
  std::optional<int> k;
};

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// True if `path` exists as a directory or could be created as one.
inline bool creatable_dir(const fs::path& path) {
  std::error_code ec;
  fs::path p = fs::absolute(path, ec);
  if (ec) return false;
  while (!p.empty() && !fs::exists(p, ec)) {
    if (p == p.parent_path()) return false;
    p = p.parent_path();
  }
  return fs::is_directory(p, ec) && ::access(p.c_str(), W_OK) == 0;
}

inline fs::path parent_or_cwd(const fs::path& file) { return file.has_parent_path() ? file.parent_path() : fs::path("."); }

// ---------------------------------------------------------------------------
// gen-corpus

/// Generator defaults per task: completion programs must be long enough
/// to leave a nonempty head after masking 25 tokens.
inline corpus::CorpusSpec default_corpus_spec(corpus::TaskKind task) {
  corpus::CorpusSpec s;
  s.task = task;
  if (task == corpus::TaskKind::Completion) {
    s.gen = {3, 5, 2, 2};
    s.min_tokens = 8;
    s.max_tokens = 50;
  } else {
    s.gen = {1, 2, 2, 2};
  }
  return s;
}

inline int cmd_gen_corpus(const corpus::CorpusSpec& spec, std::uint64_t seed, const std::string& out,
                          std::ostream& err) {
  if (out.empty()) {
    err << "gen-corpus: --out is required\n";
    return kExitUsage;
  }
  std::vector<corpus::Record> records;
  try {
    records = corpus::generate_corpus(seed, spec);
  } catch (const std::exception& e) {
    err << "gen-corpus: " << e.what() << "\n";
    return kExitUsage;
  }
  try {
    checkpoint::atomic_write(out, corpus::to_jsonl(records));
  } catch (const std::exception& e) {
    err << "gen-corpus: cannot write '" << out << "': " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainInputs {
  config::RunConfig cfg;
  std::vector<Task> train;
  std::vector<Task> pretrain;
  std::vector<Task> eval;
};

inline void apply(config::RunConfig& cfg, const Overrides& o) {
  if (o.seed) cfg.seed = *o.seed;
  if (o.beta) cfg.ppo.beta = *o.beta;
  if (o.k) cfg.ppo.top_k = *o.k;
}

/// Loads one corpus into tasks, appending a message per bad record.
inline std::vector<Task> load_tasks(const std::string& role, const std::string& path, const config::RunConfig& cfg,
                                    std::vector<std::string>& errs) {
  std::vector<Task> tasks;
  std::vector<corpus::Record> records;
  try {
    records = corpus::read_jsonl(path);
  } catch (const std::exception& e) {
    errs.push_back(role + ": " + e.what());
    return tasks;
  }
  if (records.empty()) errs.push_back(role + ": corpus '" + path + "' is empty");
  for (const auto& r : records) {
    const std::string where = role + ": record " + r.id + ": ";
    if (cfg.task == corpus::TaskKind::Synthesis && (!r.tests || r.tests->empty())) {
      errs.push_back(where + "synthesis records need unit tests");
      continue;
    }
    try {
      if (cfg.task == corpus::TaskKind::Completion) {
        const auto n = tokenize(r.source_text).size() + tokenize(r.target_text).size();
        if (static_cast<std::size_t>(cfg.mask_len) >= n) {
          errs.push_back(where + "program has " + std::to_string(n) + " tokens, not more than mask_len " +
                         std::to_string(cfg.mask_len));
          continue;
        }
      }
      auto t = corpus::to_tasks({r}, cfg.task, cfg.mask_len);
      tasks.push_back(std::move(t.front()));
    } catch (const std::exception& e) {
      errs.push_back(where + e.what());
    }
  }
  return tasks;
}

/// Parses and validates everything `train` needs. All problems are
/// collected into `errs`; nothing is written.
inline TrainInputs prepare_training(const std::string& config_path, const Overrides& o,
                                    std::vector<std::string>& errs) {
  TrainInputs in;
  std::string text;
  try {
    text = config::read_file(config_path);
  } catch (const config::ConfigError& e) {
    errs.insert(errs.end(), e.errors().begin(), e.errors().end());
    return in;
  }
  in.cfg = config::parse(text, errs);
  apply(in.cfg, o);
  for (auto& e : config::validate(in.cfg)) errs.push_back(std::move(e));
  const auto& c = in.cfg;
  if (!c.checkpoint_dir.empty() && !creatable_dir(c.checkpoint_dir))
    errs.push_back("run.checkpoint_dir '" + c.checkpoint_dir + "' cannot be created");
  if (!c.metrics.empty() && !creatable_dir(parent_or_cwd(c.metrics)))
    errs.push_back("run.metrics '" + c.metrics + "' is not in a creatable directory");
  if (c.mask_len < 1) return in;
  if (!c.corpus.empty()) in.train = load_tasks("run.corpus", c.corpus, c, errs);
  in.pretrain = c.pretrain_corpus.empty() ? in.train : load_tasks("run.pretrain_corpus", c.pretrain_corpus, c, errs);
  in.eval = c.eval_corpus.empty() ? in.train : load_tasks("run.eval_corpus", c.eval_corpus, c, errs);
  return in;
}

inline ordered_json metrics_json(const ppo::EpochMetrics& m) {
  ordered_json j;
  j["epoch"] = m.epoch;
  j["mean_reward"] = m.mean_reward;
  j["mean_r_cs"] = m.mean_r_cs;
  j["mean_r_ast"] = m.mean_r_ast;
  j["mean_r_dfg"] = m.mean_r_dfg;
  j["mean_kl"] = m.mean_kl;
  j["policy_loss"] = m.policy_loss;
  j["value_loss"] = m.value_loss;
  j["comp_rate_eval"] = m.comp_rate_eval;
  j["exact_match_eval"] = m.exact_match_eval;
  j["edit_sim_eval"] = m.edit_sim_eval;
  return j;
}

/// Keeps metrics lines for epochs <= `epoch`.
inline void truncate_metrics(const fs::path& path, int epoch) {
  std::string kept;
  if (fs::exists(path)) {
    std::istringstream in(read_text(path));
    for (std::string line; std::getline(in, line);) {
      if (line.empty()) continue;
      if (nlohmann::json::parse(line).at("epoch").get<int>() <= epoch) kept += line + "\n";
    }
  }
  checkpoint::atomic_write(path, kept);
}

inline fs::path latest_checkpoint(const config::RunConfig& c) { return fs::path(c.checkpoint_dir) / "latest.json"; }

inline fs::path epoch_checkpoint(const config::RunConfig& c, int epoch) {
  char name[32];
  std::snprintf(name, sizeof name, "epoch-%04d.json", epoch);
  return fs::path(c.checkpoint_dir) / name;
}

/// MLE warm start followed by PPO. Writes a checkpoint and a metrics line
/// after every epoch; with `resume` it continues from latest.json.
inline int cmd_train(const std::string& config_path, const Overrides& o, bool resume, std::ostream& log,
                     std::ostream& err) {
  std::vector<std::string> errs;
  TrainInputs in = prepare_training(config_path, o, errs);
  const auto& cfg = in.cfg;
  const std::uint64_t cfg_hash = config::training_hash(cfg);
  std::optional<checkpoint::Checkpoint> restored;
  if (errs.empty() && resume) {
    try {
      restored = checkpoint::load(latest_checkpoint(cfg), cfg_hash);
      if (restored->state.params.shape() != cfg.model) errs.emplace_back("checkpoint shape differs from [model]");
    } catch (const std::exception& e) {
      errs.push_back(std::string("resume: ") + e.what());
    }
  }
  if (!errs.empty()) {
    err << "train: invalid configuration (" << errs.size() << " problem" << (errs.size() == 1 ? "" : "s") << ")\n";
    for (const auto& e : errs) err << "  - " << e << "\n";
    return kExitUsage;
  }

  try {
    ppo::PpoConfig pcfg = cfg.ppo;
    pcfg.seed = cfg.seed;
    std::optional<ppo::TrainState> state;
    if (restored) {
      state = std::move(restored->state);
      truncate_metrics(cfg.metrics, state->epoch);
      log << "resumed at epoch " << state->epoch << "\n";
    } else {
      const auto mle = policy::pretrain_mle(policy::init_params(cfg.model, cfg.seed), corpus::to_examples(in.pretrain),
                                            {cfg.mle_epochs, cfg.mle_lr, 0.0, cfg.seed});
      for (std::size_t e = 0; e < mle.epoch_loss.size(); ++e)
        log << "mle epoch " << e + 1 << " loss " << mle.epoch_loss[e] << "\n";
      state = ppo::start_training(mle.params);
      checkpoint::save(latest_checkpoint(cfg), {*state, cfg_hash});
      checkpoint::save(fs::path(cfg.checkpoint_dir) / "pretrained.json", {*state, cfg_hash});
      truncate_metrics(cfg.metrics, 0);
    }

    ppo::TrainOptions opts;
    opts.eval_tasks = &in.eval;
    opts.eval_every = cfg.eval_every;
    opts.on_epoch = [&](const ppo::TrainState& s, const ppo::EpochMetrics& m) {
      checkpoint::Checkpoint ck{s, cfg_hash};
      checkpoint::save(epoch_checkpoint(cfg, s.epoch), ck);
      checkpoint::save(latest_checkpoint(cfg), ck);
      std::ofstream out(cfg.metrics, std::ios::app);
      out << metrics_json(m).dump() << "\n";
      out.flush();
      if (!out) throw std::runtime_error("cannot append to '" + cfg.metrics + "'");
      log << "epoch " << m.epoch << " reward " << m.mean_reward << " kl " << m.mean_kl << " comp_rate "
          << m.comp_rate_eval << "\n";
    };
    ppo::train(in.train, pcfg, *state, opts);
  } catch (const std::exception& e) {
    err << "train: " << e.what() << "\n";
    return kExitFail;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

inline ordered_json report_json(const eval::MetricsRecord& m) {
  ordered_json j;
  j["comp_rate"] = m.comp_rate;
  j["exact_match"] = m.exact_match;
  j["edit_sim"] = m.edit_sim;
  j["ast_mean"] = m.ast_mean;
  j["dfg_mean"] = m.dfg_mean;
  ordered_json pk = ordered_json::object();
  for (const auto& [k, v] : m.pass_at_k) pk[std::to_string(k)] = v;
  j["pass_at_k"] = pk;
  j["n_eval"] = m.n_eval;
  return j;
}

/// Scores a checkpoint on the evaluation corpus. `--k` sets the number of
/// samples for pass@1..k (synthesis only); `--seed` seeds that sampling.
inline int cmd_eval(const std::string& config_path, const std::string& checkpoint_path, const Overrides& o,
                    const std::string& out, std::ostream& stdout_, std::ostream& err) {
  std::vector<std::string> errs;
  Overrides train_side = o;
  train_side.k.reset();
  train_side.seed.reset();
  TrainInputs in = prepare_training(config_path, train_side, errs);
  const int pass_k = o.k.value_or(in.cfg.pass_k);
  if (pass_k < 0) errs.emplace_back("--k must be >= 0");
  std::optional<checkpoint::Checkpoint> ck;
  if (errs.empty()) {
    const fs::path path = checkpoint_path.empty() ? latest_checkpoint(in.cfg) : fs::path(checkpoint_path);
    try {
      ck = checkpoint::load(path, config::training_hash(in.cfg));
    } catch (const std::exception& e) {
      errs.push_back(e.what());
    }
  }
  if (!errs.empty()) {
    for (const auto& e : errs) err << "eval: " << e << "\n";
    return kExitUsage;
  }
  const eval::EvalOptions opt{in.cfg.ppo.max_len, pass_k, in.cfg.ppo.top_k, o.seed.value_or(in.cfg.seed)};
  const std::string report = report_json(eval::evaluate_policy(ck->state.params, in.eval, opt)).dump(2) + "\n";
  if (out.empty()) {
    stdout_ << report;
  } else {
    try {
      checkpoint::atomic_write(out, report);
    } catch (const std::exception& e) {
      err << "eval: " << e.what() << "\n";
      return kExitUsage;
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// score

struct ScoreOptions {
  std::string mode = "syntactic";
  std::string tests_path;       // JSON array of {"inputs", "expected"}; functional mode
  double beta = 0.1;
  std::string checkpoint_path;  // policy and reference for the KL term
  std::string source_path;      // conditioning tokens for the KL term
};

/// Per-step log-probabilities of `actions` under `p` given `source`.
inline std::vector<double> sequence_logp(const policy::PolicyParams& p, const TokenSeq& source, const TokenSeq& actions) {
  std::vector<double> out;
  TokenSeq prefix;
  for (TokenId a : actions) {
    const auto step = policy::forward(p, source, prefix);
    out.push_back(policy::log_softmax(step.logits)[a]);
    prefix.push_back(a);
  }
  return out;
}

/// Reward report for one hypothesis file against a reference file. The
/// hypothesis is scored as an episode that ends with EOS. KL is zero unless
/// a checkpoint is given and beta > 0. Exit code 0 iff r_cs > 0.
inline int cmd_score(const std::string& hyp_path, const std::string& ref_path, const ScoreOptions& so,
                     std::ostream& stdout_, std::ostream& err) {
  try {
    const TokenSeq ref = tokenize(read_text(ref_path));
    TokenSeq hyp;
    try {
      hyp = tokenize(read_text(hyp_path));
    } catch (const UnknownLexeme&) {
      hyp = {Vocabulary::kPad};  // unparsable by construction
    }
    reward::RewardMode mode = reward::RewardMode::syntactic();
    if (so.mode == "functional") {
      if (so.tests_path.empty()) throw std::invalid_argument("functional mode needs --tests");
      nlohmann::json tj;
      try {
        tj = nlohmann::json::parse(read_text(so.tests_path));
      } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("malformed tests JSON: " + std::string(e.what()));
      }
      mode = reward::RewardMode::functional(corpus::tests_from_json(tj));
    } else if (so.mode != "syntactic") {
      throw std::invalid_argument("unknown mode '" + so.mode + "' (expected syntactic or functional)");
    }
    if (!(so.beta >= 0.0)) throw std::invalid_argument("--beta must be >= 0");

    const reward::MatchReference reference(ref);
    TokenSeq actions = hyp;
    actions.push_back(Vocabulary::kEos);
    std::vector<double> kl(actions.size(), 0.0);
    if (!so.checkpoint_path.empty() && so.beta > 0.0) {
      const auto ck = checkpoint::load(so.checkpoint_path);
      const TokenSeq source = so.source_path.empty() ? TokenSeq{} : tokenize(read_text(so.source_path));
      kl = reward::kl_penalty(sequence_logp(ck.state.params, source, actions),
                              sequence_logp(ck.state.reference.params(), source, actions));
    }
    const auto terminal = reward::score_terminal(hyp, reference, mode);
    const auto rv = reward::assemble_reward(terminal, kl, so.beta, true);

    double kl_mean = 0.0;
    for (double k : kl) kl_mean += k;
    kl_mean /= static_cast<double>(kl.size());
    ordered_json j;
    j["r_cs"] = terminal.r_cs;
    j["r_ast"] = terminal.r_ast;
    j["r_dfg"] = terminal.r_dfg;
    j["kl_mean"] = kl_mean;
    j["reward_vector"] = rv.values;
    stdout_ << j.dump() << "\n";
    return terminal.r_cs > 0.0 ? kExitOk : kExitFail;
  } catch (const std::exception& e) {
    err << "score: " << e.what() << "\n";
    return kExitUsage;
  }
}

// ---------------------------------------------------------------------------
// compile-check

inline int cmd_compile_check(const std::string& path, const std::string& backend_spec, std::chrono::milliseconds timeout,
                             std::ostream& stdout_, std::ostream& err) {
  try {
    const auto backend = check::parse_backend(backend_spec);
    const auto rep = check::check_file(path, backend, timeout);
    ordered_json j;
    j["backend"] = rep.backend;
    j["status"] = rep.passed ? "pass" : "fail";
    j["diagnostic"] = rep.diagnostic;
    stdout_ << j.dump() << "\n";
    return rep.passed ? kExitOk : kExitFail;
  } catch (const std::exception& e) {
    err << "compile-check: " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace rlcf::cli

#endif  // RLCF_COMMANDS_HPP
