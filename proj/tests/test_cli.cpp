#include <cstdlib>
#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "rlcf/commands.hpp"

using namespace rlcf;
namespace fs = std::filesystem;

namespace {

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("rlcf-" + std::string(info->test_suite_name()) + "-" + info->name() + "-" +
                                        std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  std::string write(const std::string& name, const std::string& content) const {
    std::ofstream(path(name), std::ios::binary) << content;
    return path(name);
  }

  fs::path dir_;
};

// Small completion run; finishes in about a second.
std::string small_config(const std::string& corpus, const std::string& ckdir, const std::string& metrics,
                         int epochs = 2) {
  return "[run]\ntask = completion\nmask_len = 6\ncorpus = " + corpus + "\ncheckpoint_dir = " + ckdir +
         "\nmetrics = " + metrics + "\nmle_epochs = 2\nseed = 3\n\n[model]\nembed = 4\nwindow = 4\nhidden = 8\n\n"
         "[ppo]\nepochs = " + std::to_string(epochs) + "\nnum_samples = 2\nmax_len = 10\n";
}

std::string small_corpus(const std::string& out) {
  auto spec = cli::default_corpus_spec(corpus::TaskKind::Completion);
  spec.count = 12;
  spec.mask_len = 6;
  std::ostringstream err;
  EXPECT_EQ(cli::cmd_gen_corpus(spec, 5, out, err), cli::kExitOk) << err.str();
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

TEST(Config, ParsesSectionsAndComments) {
  const auto c = config::parse(
      "# comment\n[run]\ntask = synthesis\ncorpus = c.jsonl\nseed = 9\n; other comment\n"
      "[model]\nhidden = 32\n[ppo]\nbeta = 0.05\nlr_schedule = warmup_inv_sqrt\nreward_terms = cs,dfg\n");
  EXPECT_EQ(c.task, corpus::TaskKind::Synthesis);
  EXPECT_EQ(c.corpus, "c.jsonl");
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.model.hidden, 32);
  EXPECT_EQ(c.ppo.beta, 0.05);
  EXPECT_EQ(c.ppo.lr.schedule, LrSchedule::WarmupInvSqrt);
  EXPECT_TRUE(c.ppo.terms.compile);
  EXPECT_FALSE(c.ppo.terms.ast);
  EXPECT_TRUE(c.ppo.terms.dfg);
}

TEST(Config, DefaultHyperparameters) {
  const auto c = config::parse("[run]\ncorpus = x\n");
  EXPECT_EQ(c.mask_len, 25);
  EXPECT_EQ(c.ppo.gamma, 1.0);
  EXPECT_EQ(c.ppo.beta, 0.1);
  EXPECT_EQ(c.ppo.epsilon, 0.2);
  EXPECT_EQ(c.ppo.alpha, 0.001);
  EXPECT_EQ(c.ppo.top_k, 5);
  EXPECT_EQ(c.ppo.num_samples, 3);
}

TEST(Config, RoundTripIsCanonical) {
  const std::string text = "[ppo]\nbeta=0.25\n[run]\n  corpus =  a b.jsonl  \nmle_lr = 0.1\n";
  const auto c = config::parse(text);
  const auto dumped = config::dump(c);
  EXPECT_EQ(config::dump(config::parse(dumped)), dumped);
  const auto again = config::parse(dumped);
  EXPECT_EQ(again.corpus, "a b.jsonl");
  EXPECT_EQ(again.ppo.beta, 0.25);
  EXPECT_EQ(again.mle_lr, 0.1);
  EXPECT_EQ(config::training_hash(again), config::training_hash(c));
}

TEST(Config, DoublesRoundTripExactly) {
  config::RunConfig c;
  c.corpus = "x";
  c.ppo.beta = 0.1 + 0.2;
  c.ppo.lr.lr = 1.0 / 3.0;
  const auto back = config::parse(config::dump(c));
  EXPECT_EQ(back.ppo.beta, c.ppo.beta);
  EXPECT_EQ(back.ppo.lr.lr, c.ppo.lr.lr);
}

TEST(Config, ListsEveryProblemAtOnce) {
  try {
    config::parse("[run]\ntsk = completion\nmask_len = -1\n[ppo]\nbeta = lots\nepsilon = 0\n[extra]\n");
    FAIL() << "expected ConfigError";
  } catch (const config::ConfigError& e) {
    const auto& errs = e.errors();
    auto has = [&](const std::string& needle) {
      for (const auto& x : errs)
        if (x.find(needle) != std::string::npos) return true;
      return false;
    };
    EXPECT_TRUE(has("unknown key 'tsk'"));
    EXPECT_TRUE(has("ppo.beta"));
    EXPECT_TRUE(has("unknown section [extra]"));
    EXPECT_TRUE(has("run.corpus is required"));
    EXPECT_TRUE(has("run.mask_len"));
    EXPECT_TRUE(has("epsilon"));
    EXPECT_GE(errs.size(), 6u);
  }
}

TEST(Config, HashIgnoresOutputsAndBudget) {
  auto a = config::parse("[run]\ncorpus = x\n");
  auto b = a;
  b.metrics = "elsewhere.jsonl";
  b.checkpoint_dir = "ck2";
  b.ppo.epochs = 99;
  b.eval_every = 5;
  EXPECT_EQ(config::training_hash(a), config::training_hash(b));
  b.ppo.beta = 0.2;
  EXPECT_NE(config::training_hash(a), config::training_hash(b));
}

// ---------------------------------------------------------------------------
// Checkpoint

TEST(Checkpoint, RoundTripIsExact) {
  auto st = ppo::start_training(policy::init_params({31, 4, 4, 8}, 2));
  st.epoch = 7;
  st.optimizer.step = 3;
  st.optimizer.m.assign(st.params.data().size(), 0.125);
  st.optimizer.v.assign(st.params.data().size(), 1e-300);
  st.params.data()[5] = 1.0 / 3.0;
  const auto back = checkpoint::deserialize(checkpoint::serialize({st, 42}), 42);
  EXPECT_EQ(back.config_hash, 42u);
  EXPECT_EQ(back.state.epoch, 7);
  EXPECT_EQ(back.state.optimizer.step, 3);
  EXPECT_EQ(back.state.optimizer.m, st.optimizer.m);
  EXPECT_EQ(back.state.optimizer.v, st.optimizer.v);
  ASSERT_TRUE(back.state.params.shape() == st.params.shape());
  EXPECT_TRUE(std::equal(back.state.params.data().begin(), back.state.params.data().end(), st.params.data().begin()));
  EXPECT_TRUE(std::equal(back.state.reference.params().data().begin(), back.state.reference.params().data().end(),
                         st.reference.params().data().begin()));
}

TEST(Checkpoint, RejectsMismatches) {
  const auto st = ppo::start_training(policy::init_params({31, 4, 4, 8}, 2));
  const auto text = checkpoint::serialize({st, 42});
  EXPECT_THROW(checkpoint::deserialize(text, 43), checkpoint::CheckpointError);
  EXPECT_THROW(checkpoint::deserialize("{not json"), checkpoint::CheckpointError);
  auto j = nlohmann::json::parse(text);
  j["vocab_hash"] = "0000000000000000";
  EXPECT_THROW(checkpoint::deserialize(j.dump()), checkpoint::CheckpointError);
  j = nlohmann::json::parse(text);
  j["params"]["w1"].erase(0);
  EXPECT_THROW(checkpoint::deserialize(j.dump()), checkpoint::CheckpointError);
  j = nlohmann::json::parse(text);
  j["adam"]["m"] = std::vector<double>{1.0};
  EXPECT_THROW(checkpoint::deserialize(j.dump()), checkpoint::CheckpointError);
}

TEST_F(TempDir, AtomicWriteLeavesNoTemporary) {
  checkpoint::atomic_write(path("sub/a.json"), "one");
  checkpoint::atomic_write(path("sub/a.json"), "two");
  EXPECT_EQ(cli::read_text(path("sub/a.json")), "two");
  EXPECT_FALSE(fs::exists(path("sub/a.json.tmp")));
}

// ---------------------------------------------------------------------------
// gen-corpus

TEST_F(TempDir, GenCorpusWritesCompilableDeterministicLines) {
  const auto spec = cli::default_corpus_spec(corpus::TaskKind::Completion);
  std::ostringstream err;
  ASSERT_EQ(cli::cmd_gen_corpus(spec, 7, path("a.jsonl"), err), cli::kExitOk);
  ASSERT_EQ(cli::cmd_gen_corpus(spec, 7, path("b.jsonl"), err), cli::kExitOk);
  EXPECT_EQ(cli::read_text(path("a.jsonl")), cli::read_text(path("b.jsonl")));
  const auto recs = corpus::read_jsonl(path("a.jsonl"));
  ASSERT_EQ(recs.size(), 500u);
  for (const auto& r : recs) {
    const auto c = lang::compile(tokenize(r.source_text + " " + r.target_text));
    EXPECT_TRUE(c.tree.has_value()) << r.id;
    EXPECT_EQ(tokenize(r.target_text).size(), 25u);
  }
}

TEST_F(TempDir, GenCorpusSynthesisRecordsPassOwnTests) {
  auto spec = cli::default_corpus_spec(corpus::TaskKind::Synthesis);
  spec.count = 100;
  std::ostringstream err;
  ASSERT_EQ(cli::cmd_gen_corpus(spec, 7, path("s.jsonl"), err), cli::kExitOk);
  for (const auto& r : corpus::read_jsonl(path("s.jsonl"))) {
    ASSERT_TRUE(r.tests.has_value());
    EXPECT_EQ(r.tests->size(), 3u);
    const auto c = lang::compile(tokenize(r.target_text));
    ASSERT_TRUE(c.tree.has_value());
    EXPECT_EQ(lang::run_tests(*c.tree, *r.tests), lang::TestOutcome::AllPassed) << r.id;
  }
}

TEST_F(TempDir, GenCorpusRejectsBadInputs) {
  auto spec = cli::default_corpus_spec(corpus::TaskKind::Completion);
  std::ostringstream err;
  spec.count = 0;
  EXPECT_EQ(cli::cmd_gen_corpus(spec, 7, path("x.jsonl"), err), cli::kExitUsage);
  spec.count = 5;
  EXPECT_EQ(cli::cmd_gen_corpus(spec, 7, "/proc/forbidden/x.jsonl", err), cli::kExitUsage);
}

// ---------------------------------------------------------------------------
// score

TEST_F(TempDir, ScoreIdenticalFiles) {
  const auto f = write("p.ml", "a = x0 + 1 ; return a * 2 ;");
  std::ostringstream out, err;
  EXPECT_EQ(cli::cmd_score(f, f, {}, out, err), cli::kExitOk);
  const auto j = nlohmann::json::parse(out.str());
  EXPECT_EQ(j["r_cs"], 1.0);
  EXPECT_EQ(j["r_ast"], 1.0);
  EXPECT_EQ(j["r_dfg"], 1.0);
  EXPECT_EQ(j["kl_mean"], 0.0);
}

TEST_F(TempDir, ScoreUnparsableHypothesis) {
  const auto ref = write("r.ml", "return 1 ;");
  for (const char* bad : {"return + ;", "return $ ;"}) {
    const auto hyp = write("h.ml", bad);
    std::ostringstream out, err;
    EXPECT_EQ(cli::cmd_score(hyp, ref, {}, out, err), cli::kExitFail) << bad;
    const auto j = nlohmann::json::parse(out.str());
    EXPECT_EQ(j["r_cs"], -1.0);
    EXPECT_EQ(j["r_ast"], 0.0);
    EXPECT_EQ(j["r_dfg"], 0.0);
  }
}

TEST_F(TempDir, ScoreBetaZeroHasNoKl) {
  const auto hyp = write("h.ml", "return 2 ;"), ref = write("r.ml", "return 1 ;");
  auto st = ppo::start_training(policy::init_params({31, 4, 4, 8}, 2));
  for (double& x : st.params.data()) x += 0.5;
  checkpoint::save(path("ck.json"), {st, 0});

  cli::ScoreOptions so;
  so.checkpoint_path = path("ck.json");
  std::ostringstream out, err;
  ASSERT_EQ(cli::cmd_score(hyp, ref, so, out, err), cli::kExitOk) << err.str();
  auto j = nlohmann::json::parse(out.str());
  EXPECT_NE(j["kl_mean"].get<double>(), 0.0);
  const auto with_kl = j["reward_vector"].get<std::vector<double>>();

  so.beta = 0.0;
  out.str("");
  ASSERT_EQ(cli::cmd_score(hyp, ref, so, out, err), cli::kExitOk);
  j = nlohmann::json::parse(out.str());
  EXPECT_EQ(j["kl_mean"].get<double>(), 0.0);
  const auto rv = j["reward_vector"].get<std::vector<double>>();
  ASSERT_EQ(rv.size(), 4u);  // three tokens plus EOS
  EXPECT_EQ(rv[0], 0.0);
  EXPECT_EQ(rv[1], 0.0);
  EXPECT_EQ(rv[2], 0.0);
  EXPECT_EQ(rv[3], 1.0 + j["r_ast"].get<double>() + j["r_dfg"].get<double>());
  EXPECT_NE(with_kl, rv);
}

TEST_F(TempDir, ScoreFunctionalMode) {
  const auto hyp = write("h.ml", "return x0 + 1 ;"), ref = write("r.ml", "return x0 + 1 ;");
  cli::ScoreOptions so;
  so.mode = "functional";
  so.tests_path = write("t.json", R"([{"inputs": {"x0": 1}, "expected": 2}, {"inputs": {"x0": 5}, "expected": 6}])");
  std::ostringstream out, err;
  EXPECT_EQ(cli::cmd_score(hyp, ref, so, out, err), cli::kExitOk);
  EXPECT_EQ(nlohmann::json::parse(out.str())["r_cs"], 1.0);
  so.tests_path = write("t.json", R"([{"inputs": {"x0": 5}, "expected": 7}])");
  out.str("");
  EXPECT_EQ(cli::cmd_score(hyp, ref, so, out, err), cli::kExitFail);
  EXPECT_EQ(nlohmann::json::parse(out.str())["r_cs"], -0.3);
  so.tests_path = write("t.json", "[{\"inputs\": ");
  EXPECT_EQ(cli::cmd_score(hyp, ref, so, out, err), cli::kExitUsage);
  so.tests_path = path("missing.json");
  EXPECT_EQ(cli::cmd_score(hyp, ref, so, out, err), cli::kExitUsage);
}

TEST_F(TempDir, ScoreMissingFileIsUsageError) {
  const auto ref = write("r.ml", "return 1 ;");
  std::ostringstream out, err;
  EXPECT_EQ(cli::cmd_score(path("nope.ml"), ref, {}, out, err), cli::kExitUsage);
}

// ---------------------------------------------------------------------------
// compile-check

TEST_F(TempDir, CompileCheckMinilang) {
  std::ostringstream out, err;
  EXPECT_EQ(cli::cmd_compile_check(write("ok.ml", "return 1 ;"), "minilang", std::chrono::seconds(10), out, err),
            cli::kExitOk);
  EXPECT_EQ(nlohmann::json::parse(out.str())["status"], "pass");
  out.str("");
  EXPECT_EQ(cli::cmd_compile_check(write("bad.ml", "return y ;"), "minilang", std::chrono::seconds(10), out, err),
            cli::kExitFail);
  const auto j = nlohmann::json::parse(out.str());
  EXPECT_EQ(j["status"], "fail");
  EXPECT_EQ(j["backend"], "minilang");
  EXPECT_FALSE(j["diagnostic"].get<std::string>().empty());
}

TEST_F(TempDir, CompileCheckExternalExitCodes) {
  const auto f = write("a.c", "x");
  std::ostringstream out, err;
  EXPECT_EQ(cli::cmd_compile_check(f, "external:false", std::chrono::seconds(10), out, err), cli::kExitFail);
  EXPECT_EQ(nlohmann::json::parse(out.str())["status"], "fail");
  out.str("");
  EXPECT_EQ(cli::cmd_compile_check(f, "external:test -f {}", std::chrono::seconds(10), out, err), cli::kExitOk);
  out.str("");
  EXPECT_EQ(cli::cmd_compile_check(path("absent.c"), "external:test -f", std::chrono::seconds(10), out, err),
            cli::kExitFail);
}

TEST_F(TempDir, CompileCheckPathIsQuoted) {
  const auto f = write("it's here.c", "x");
  std::ostringstream out, err;
  EXPECT_EQ(cli::cmd_compile_check(f, "external:test -f {}", std::chrono::seconds(10), out, err), cli::kExitOk);
}

TEST_F(TempDir, CompileCheckTimeout) {
  std::ostringstream out, err;
  const auto t0 = std::chrono::steady_clock::now();
  EXPECT_EQ(cli::cmd_compile_check(write("a.c", "x"), "external:sleep 30 && true {}", std::chrono::milliseconds(200), out, err),
            cli::kExitFail);
  EXPECT_LT(std::chrono::steady_clock::now() - t0, std::chrono::seconds(5));
  const auto j = nlohmann::json::parse(out.str());
  EXPECT_EQ(j["status"], "fail");
  EXPECT_EQ(j["diagnostic"], "timeout");
}

TEST_F(TempDir, CompileCheckMissingCommandIsConfigurationError) {
  std::ostringstream out, err;
  const auto f = write("a.c", "x");
  EXPECT_EQ(cli::cmd_compile_check(f, "external:no-such-compiler-xyz {}", std::chrono::seconds(10), out, err),
            cli::kExitUsage);
  EXPECT_TRUE(out.str().empty());
  EXPECT_EQ(cli::cmd_compile_check(f, "external:", std::chrono::seconds(10), out, err), cli::kExitUsage);
  EXPECT_EQ(cli::cmd_compile_check(f, "gcc", std::chrono::seconds(10), out, err), cli::kExitUsage);
}

TEST(Substitute, ReplacesOrAppends) {
  EXPECT_EQ(check::substitute("cc -c {} -o /dev/null", "a b.c"), "cc -c 'a b.c' -o /dev/null");
  EXPECT_EQ(check::substitute("cc -fsyntax-only", "x.c"), "cc -fsyntax-only 'x.c'");
  EXPECT_EQ(check::shell_quote("it's"), "'it'\\''s'");
}

// ---------------------------------------------------------------------------
// train / eval

TEST_F(TempDir, TrainRejectsBadConfigBeforeAnyCompute) {
  const auto cfg = write("c.ini", "[run]\ncorpus = " + path("missing.jsonl") + "\ncheckpoint_dir = " +
                                      path("ck") + "\nbogus = 1\n[ppo]\nbeta = -1\n");
  std::ostringstream log, err;
  EXPECT_EQ(cli::cmd_train(cfg, {}, false, log, err), cli::kExitUsage);
  EXPECT_NE(err.str().find("bogus"), std::string::npos);
  EXPECT_NE(err.str().find("beta"), std::string::npos);
  EXPECT_NE(err.str().find("missing.jsonl"), std::string::npos);
  EXPECT_FALSE(fs::exists(path("ck")));
  EXPECT_TRUE(log.str().empty());
}

TEST_F(TempDir, TrainRejectsProgramsNotLongerThanMask) {
  const auto corpus = small_corpus(path("c.jsonl"));
  auto text = small_config(corpus, path("ck"), path("m.jsonl"));
  text.replace(text.find("mask_len = 6"), 12, "mask_len = 99");
  std::ostringstream log, err;
  EXPECT_EQ(cli::cmd_train(write("c.ini", text), {}, false, log, err), cli::kExitUsage);
  EXPECT_NE(err.str().find("mask_len"), std::string::npos);
}

TEST_F(TempDir, TrainWritesCheckpointsAndMetrics) {
  const auto corpus = small_corpus(path("c.jsonl"));
  const auto cfg = write("c.ini", small_config(corpus, path("ck"), path("m.jsonl")));
  std::ostringstream log, err;
  ASSERT_EQ(cli::cmd_train(cfg, {}, false, log, err), cli::kExitOk) << err.str();
  for (const char* f : {"latest.json", "pretrained.json", "epoch-0001.json", "epoch-0002.json"})
    EXPECT_TRUE(fs::exists(path("ck") + "/" + f)) << f;
  std::istringstream in(cli::read_text(path("m.jsonl")));
  int lines = 0;
  for (std::string line; std::getline(in, line); ++lines) {
    const auto j = nlohmann::ordered_json::parse(line);
    EXPECT_EQ(j.begin().key(), "epoch");
    EXPECT_EQ(j["epoch"], lines + 1);
    for (const char* k : {"mean_reward", "mean_kl", "policy_loss", "value_loss", "comp_rate_eval", "edit_sim_eval"})
      EXPECT_TRUE(j.contains(k)) << k;
  }
  EXPECT_EQ(lines, 2);

  std::ostringstream out;
  ASSERT_EQ(cli::cmd_eval(cfg, "", {}, "", out, err), cli::kExitOk) << err.str();
  const auto rep = nlohmann::json::parse(out.str());
  EXPECT_EQ(rep["n_eval"], 12);
  EXPECT_GE(rep["comp_rate"].get<double>(), 0.0);
}

TEST_F(TempDir, TrainIsDeterministic) {
  const auto corpus = small_corpus(path("c.jsonl"));
  std::ostringstream log, err;
  ASSERT_EQ(cli::cmd_train(write("a.ini", small_config(corpus, path("cka"), path("a.jsonl"))), {}, false, log, err),
            cli::kExitOk);
  ASSERT_EQ(cli::cmd_train(write("b.ini", small_config(corpus, path("ckb"), path("b.jsonl"))), {}, false, log, err),
            cli::kExitOk);
  EXPECT_EQ(cli::read_text(path("a.jsonl")), cli::read_text(path("b.jsonl")));
  EXPECT_EQ(cli::read_text(path("cka/latest.json")), cli::read_text(path("ckb/latest.json")));
}

TEST_F(TempDir, ResumeReproducesUninterruptedRun) {
  const auto corpus = small_corpus(path("c.jsonl"));
  std::ostringstream log, err;
  ASSERT_EQ(cli::cmd_train(write("full.ini", small_config(corpus, path("ckf"), path("f.jsonl"), 4)), {}, false, log, err),
            cli::kExitOk);
  ASSERT_EQ(cli::cmd_train(write("part.ini", small_config(corpus, path("ckp"), path("p.jsonl"), 2)), {}, false, log, err),
            cli::kExitOk);
  ASSERT_EQ(cli::cmd_train(write("part.ini", small_config(corpus, path("ckp"), path("p.jsonl"), 4)), {}, true, log, err),
            cli::kExitOk)
      << err.str();
  EXPECT_EQ(cli::read_text(path("f.jsonl")), cli::read_text(path("p.jsonl")));
  EXPECT_EQ(cli::read_text(path("ckf/latest.json")), cli::read_text(path("ckp/latest.json")));
}

TEST_F(TempDir, ResumeRejectsChangedTrainingSettings) {
  const auto corpus = small_corpus(path("c.jsonl"));
  std::ostringstream log, err;
  ASSERT_EQ(cli::cmd_train(write("a.ini", small_config(corpus, path("ck"), path("m.jsonl"), 1)), {}, false, log, err),
            cli::kExitOk);
  cli::Overrides o;
  o.beta = 0.5;
  EXPECT_EQ(cli::cmd_train(write("a.ini", small_config(corpus, path("ck"), path("m.jsonl"), 2)), o, true, log, err),
            cli::kExitUsage);
  EXPECT_NE(err.str().find("config hash"), std::string::npos);
}

// ---------------------------------------------------------------------------
// Binary

TEST_F(TempDir, BinaryExitCodes) {
  const char* bin = std::getenv("RLCF_CLI");
  if (!bin) GTEST_SKIP() << "RLCF_CLI not set";
  auto run = [&](const std::string& args) {
    const int st = std::system((std::string(bin) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  };
  const auto ok = write("ok.ml", "return 1 ;"), bad = write("bad.ml", "return ;");
  EXPECT_EQ(run("compile-check " + ok), 0);
  EXPECT_EQ(run("compile-check " + bad), 1);
  EXPECT_EQ(run("compile-check --backend external:no-such-tool-xyz " + ok), 2);
  EXPECT_EQ(run("score " + ok + " " + ok), 0);
  EXPECT_EQ(run("score " + bad + " " + ok), 1);
  EXPECT_EQ(run("no-such-subcommand"), 2);
  EXPECT_EQ(run("gen-corpus --count 3 --out " + path("g.jsonl")), 0);
  EXPECT_EQ(corpus::read_jsonl(path("g.jsonl")).size(), 3u);
}
