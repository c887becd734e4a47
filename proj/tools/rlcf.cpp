#include <chrono>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rlcf/commands.hpp"

using namespace rlcf;

int main(int argc, char** argv) {
  CLI::App app{"Reinforcement learning from compiler feedback on a toy language"};
  app.require_subcommand(1);

  // gen-corpus
  auto* gen = app.add_subcommand("gen-corpus", "Generate a synthetic JSONL corpus");
  std::string gen_task = "completion", gen_out;
  std::uint64_t gen_seed = 7;
  int count = 500;
  std::optional<int> mask_len, min_stmts, max_stmts, max_depth, inputs, min_tokens, max_tokens, n_tests, input_max;
  gen->add_option("--task", gen_task, "completion or synthesis")->check(CLI::IsMember({"completion", "synthesis"}));
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--count", count, "Number of records");
  gen->add_option("--out", gen_out, "Output JSONL path")->required();
  gen->add_option("--mask-len", mask_len, "Completion: masked suffix length");
  gen->add_option("--min-stmts", min_stmts);
  gen->add_option("--max-stmts", max_stmts);
  gen->add_option("--max-depth", max_depth, "Maximum expression depth");
  gen->add_option("--inputs", inputs, "Number of inputs x0.. a program may read (1-4)");
  gen->add_option("--min-tokens", min_tokens);
  gen->add_option("--max-tokens", max_tokens, "0 means unbounded");
  gen->add_option("--tests", n_tests, "Synthesis: unit tests per problem");
  gen->add_option("--input-max", input_max, "Synthesis: test inputs are drawn from [0, input-max]");

  // train
  auto* train = app.add_subcommand("train", "MLE warm start, then PPO fine-tuning");
  std::string train_cfg;
  cli::Overrides train_over;
  bool resume = false;
  train->add_option("--config", train_cfg, "Run configuration file")->required();
  train->add_option("--seed", train_over.seed, "Override run.seed");
  train->add_option("--beta", train_over.beta, "Override ppo.beta");
  train->add_option("--k", train_over.k, "Override ppo.top_k");
  train->add_flag("--resume", resume, "Continue from <checkpoint_dir>/latest.json");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint and print a JSON report");
  std::string eval_cfg, eval_ckpt, eval_out;
  cli::Overrides eval_over;
  ev->add_option("--config", eval_cfg, "Run configuration file")->required();
  ev->add_option("--checkpoint", eval_ckpt, "Defaults to <checkpoint_dir>/latest.json");
  ev->add_option("--k", eval_over.k, "Samples per problem for pass@1..k");
  ev->add_option("--seed", eval_over.seed, "Sampling seed for pass@k");
  ev->add_option("--out", eval_out, "Write the report here instead of stdout");

  // score
  auto* score = app.add_subcommand("score", "Reward components for one hypothesis/reference pair");
  std::string hyp, ref;
  cli::ScoreOptions so;
  score->add_option("hyp", hyp, "Hypothesis program file")->required();
  score->add_option("ref", ref, "Reference program file")->required();
  score->add_option("--mode", so.mode, "syntactic or functional")->check(CLI::IsMember({"syntactic", "functional"}));
  score->add_option("--tests", so.tests_path, "Unit tests JSON array (functional mode)");
  score->add_option("--beta", so.beta, "KL coefficient");
  score->add_option("--checkpoint", so.checkpoint_path, "Policy and reference for the KL term");
  score->add_option("--source", so.source_path, "Conditioning source for the KL term");

  // compile-check
  auto* cc = app.add_subcommand("compile-check", "Compile check with a pluggable backend");
  std::string cc_file, backend = "minilang";
  double timeout_s = 10.0;
  cc->add_option("file", cc_file, "Program file")->required();
  cc->add_option("--backend", backend, "minilang or external:<command template>");
  cc->add_option("--timeout", timeout_s, "External backend wall-clock limit in seconds")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? cli::kExitOk : cli::kExitUsage;
  }

  if (*gen) {
    const auto kind = corpus::parse_task_kind(gen_task);
    auto spec = cli::default_corpus_spec(kind);
    spec.count = count;
    if (mask_len) spec.mask_len = *mask_len;
    if (min_stmts) spec.gen.min_stmts = *min_stmts;
    if (max_stmts) spec.gen.max_stmts = *max_stmts;
    if (max_depth) spec.gen.max_expr_depth = *max_depth;
    if (inputs) spec.gen.allowed_inputs = *inputs;
    if (min_tokens) spec.min_tokens = *min_tokens;
    if (max_tokens) spec.max_tokens = *max_tokens;
    if (n_tests) spec.tests_per_problem = *n_tests;
    if (input_max) spec.input_max = *input_max;
    return cli::cmd_gen_corpus(spec, gen_seed, gen_out, std::cerr);
  }
  if (*train) return cli::cmd_train(train_cfg, train_over, resume, std::cout, std::cerr);
  if (*ev) return cli::cmd_eval(eval_cfg, eval_ckpt, eval_over, eval_out, std::cout, std::cerr);
  if (*score) return cli::cmd_score(hyp, ref, so, std::cout, std::cerr);
  const auto ms = std::chrono::milliseconds(static_cast<long long>(timeout_s * 1000.0));
  return cli::cmd_compile_check(cc_file, backend, ms, std::cout, std::cerr);
}
