// Acceptance checks. `acceptance N` runs criterion N; no argument runs all.
// Exit status is 0 iff every selected criterion passes.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <unistd.h>

#include "rlcf/commands.hpp"
#include "rlcf/corpus.hpp"
#include "rlcf/eval.hpp"
#include "rlcf/ppo.hpp"
#include "rlcf/reward.hpp"
#include "support/oracles.hpp"

using namespace rlcf;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

// ---------------------------------------------------------------------------

Outcome gradient_check() {
  Stopwatch sw;
  std::mt19937_64 rng(5);
  constexpr std::array<double, 3> kAlphas{0.0, 0.001, 1.0};
  double worst = 0.0;
  std::size_t coords = 0;
  for (int i = 0; i < 10; ++i) {
    const auto p = oracle::random_params(100 + static_cast<std::uint64_t>(i));
    const std::vector<policy::Trajectory> batch{oracle::random_trajectory(p, rng, 3, 6)};
    const auto r = oracle::finite_difference(p, batch, ppo::make_loss(0.2, kAlphas[i % 3], false), 1e-4, 1e-8);
    worst = std::max(worst, r.max_rel_error);
    coords += r.checked;
  }
  const double secs = sw.seconds();
  return {worst < 1e-3 && secs < 30.0, fmt("max rel error %.2e over %zu coordinates, %.1f s", worst, coords, secs)};
}

Outcome oracle_agreement() {
  Stopwatch sw;
  std::mt19937_64 rng(21);
  int disagreements = 0;
  for (int i = 0; i < 200; ++i) {
    const TokenSeq ref = oracle::random_program(rng, 40);
    TokenSeq hyp = oracle::random_program(rng, 40);
    if (i % 4 == 1) hyp = oracle::mutate(ref, rng);
    if (i % 4 == 2) hyp = ref;
    disagreements += reward::ast_match(hyp, ref) != oracle::ast_match(hyp, ref);
    disagreements += reward::dfg_match(hyp, ref) != oracle::dfg_match(hyp, ref);
  }
  const double secs = sw.seconds();
  return {disagreements == 0 && secs < 10.0, fmt("%d disagreements on 200 pairs, %.2f s", disagreements, secs)};
}

Outcome reward_levels() {
  std::mt19937_64 rng(31);
  // x1 = 0 makes division by x1 a runtime error.
  const auto functional = reward::RewardMode::functional({{{{"x0", 2}, {"x1", 0}}, 2}});
  std::uniform_int_distribution<int> any(Vocabulary::kFirstIdent, static_cast<int>(Vocabulary::size()) - 1);
  std::set<double> syn, fun;
  for (int i = 0; i < 1000; ++i) {
    TokenSeq t;
    switch (i % 3) {
      case 0: t = oracle::random_program(rng); break;
      case 1: t = oracle::mutate(oracle::random_program(rng), rng); break;
      default:
        for (int n = 1 + static_cast<int>(rng() % 12); n > 0; --n) t.push_back(static_cast<TokenId>(any(rng)));
    }
    syn.insert(reward::compile_signal(t, reward::RewardMode::syntactic()));
    fun.insert(reward::compile_signal(t, functional));
  }
  const std::set<double> want_syn{-1.0, 1.0}, want_fun{-1.0, -0.6, -0.3, 1.0};
  auto show = [](const std::set<double>& s) {
    std::string o;
    for (double v : s) o += fmt("%s%g", o.empty() ? "" : ",", v);
    return "{" + o + "}";
  };
  return {syn == want_syn && fun == want_fun,
          "syntactic " + show(syn) + " functional " + show(fun) + " over 1000 sequences"};
}

std::vector<Task> completion_tasks(std::uint64_t seed, int count) {
  auto spec = cli::default_corpus_spec(corpus::TaskKind::Completion);
  spec.count = count;
  return corpus::to_tasks(corpus::generate_corpus(seed, spec), corpus::TaskKind::Completion, spec.mask_len);
}

Outcome reward_placement() {
  const auto tasks = completion_tasks(7, 100);
  const auto mle = policy::pretrain_mle(policy::init_params({}, 1), corpus::to_examples(tasks), {3, 3e-3, 0.0, 1});
  auto st = ppo::start_training(mle.params);
  ppo::PpoConfig cfg;
  cfg.epochs = 2;
  std::size_t checked = 0, bad = 0;
  ppo::TrainOptions o;
  o.eval_every = cfg.epochs;
  o.on_trajectory = [&](const policy::Trajectory& tr) {
    ++checked;
    const auto& rv = tr.reward;
    const std::size_t T = rv.values.size();
    bool ok = T == tr.length() && T >= 1;
    for (std::size_t t = 0; ok && t + 1 < T; ++t) ok = rv.values[t] == -cfg.beta * rv.r_kl[t];
    if (ok) ok = rv.values[T - 1] == (0.0 - cfg.beta * rv.r_kl[T - 1]) + rv.terminal.sum();
    bad += !ok;
  };
  ppo::train(tasks, cfg, st, o);
  return {bad == 0 && checked > 0, fmt("%zu of %zu trajectories violate placement", bad, checked)};
}

Outcome gae_identity() {
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t T = 1 + rng() % 20;
    std::vector<double> r(T), v(T + 1);
    for (auto& x : r) x = u(rng);
    for (auto& x : v) x = u(rng);
    v.back() = 0.0;
    const auto a = ppo::compute_advantages(r, v, 1.0);
    for (std::size_t t = 0; t < T; ++t) {
      double s = 0.0;
      for (std::size_t j = t; j < T; ++j) s += a.deltas[j];
      worst = std::max(worst, std::abs(a.advantages[t] - s) / std::max(1.0, std::abs(s)));
    }
  }
  // delta = [0, 0, 0.5] with zero values.
  const std::vector<double> r0{0.0, 0.0, 0.5}, v0(4, 0.0);
  const auto ex = ppo::compute_advantages(r0, v0, 1.0);
  const bool exact = ex.advantages == std::vector<double>{0.5, 0.5, 0.5};
  return {worst <= 1e-12 && exact, fmt("max deviation %.1e; worked example %s", worst, exact ? "exact" : "wrong")};
}

Outcome clip_table() {
  const double a = ppo::clipped_term(1.5, 1.0, 0.2), b = ppo::clipped_term(0.5, -1.0, 0.2);
  int nonzero = 0, cases = 0;
  for (double c = 0.05; c < 3.0; c += 0.05)
    for (double adv : {-2.0, -0.5, 0.5, 2.0}) {
      const bool clipped = (adv > 0 && c > 1.2) || (adv < 0 && c < 0.8);
      if (!clipped) continue;
      ++cases;
      nonzero += ppo::clipped_term_dc(c, adv, 0.2) != 0.0;
    }
  return {a == 1.2 && b == -0.8 && nonzero == 0,
          fmt("(1.5,1)->%g (0.5,-1)->%g; dc nonzero in %d of %d clipped cases", a, b, nonzero, cases)};
}

// Default hyperparameters except where a run sets its own values.
struct RunResult {
  eval::MetricsRecord baseline;
  ppo::EpochMetrics last;
  double seconds = 0.0;
};

RunResult completion_run(std::uint64_t corpus_seed, std::uint64_t seed, double beta, reward::RewardTerms terms,
                         bool with_baseline = true) {
  Stopwatch sw;
  const auto tasks = completion_tasks(corpus_seed, 500);
  const auto mle = policy::pretrain_mle(policy::init_params({}, seed), corpus::to_examples(tasks), {10, 3e-3, 0.0, seed});
  RunResult out;
  ppo::PpoConfig cfg;
  cfg.epochs = 30;
  cfg.beta = beta;
  cfg.terms = terms;
  cfg.seed = seed;
  if (with_baseline) out.baseline = eval::evaluate_policy(mle.params, tasks, {cfg.max_len, 0, cfg.top_k, seed});
  auto st = ppo::start_training(mle.params);
  ppo::TrainOptions o;
  o.eval_every = cfg.epochs;
  out.last = ppo::train(tasks, cfg, st, o).back();
  out.seconds = sw.seconds();
  return out;
}

constexpr reward::RewardTerms kAllTerms{true, true, true};

Outcome completion_gain() {
  const auto r = completion_run(7, 1, 0.1, kAllTerms);
  const double comp0 = r.baseline.comp_rate, comp = r.last.comp_rate_eval;
  const double edit0 = r.baseline.edit_sim, edit = r.last.edit_sim_eval;
  const bool pass = comp >= 0.95 && comp - comp0 >= 0.15 && edit0 - edit <= 0.05 && r.seconds < 600.0;
  return {pass, fmt("comp rate %.3f -> %.3f, edit sim %.3f -> %.3f, %.0f s", comp0, comp, edit0, edit, r.seconds)};
}

Outcome kl_ablation() {
  const auto loose = completion_run(7, 1, 0.0, kAllTerms, false);
  const auto tight = completion_run(7, 1, 0.1, kAllTerms, false);
  const double secs = loose.seconds + tight.seconds;
  const bool pass = loose.last.mean_kl >= 2.0 * tight.last.mean_kl && tight.last.edit_sim_eval >= loose.last.edit_sim_eval &&
                    secs < 1200.0;
  return {pass, fmt("mean KL beta=0 %.3f vs beta=0.1 %.3f; edit sim %.3f vs %.3f; %.0f s", loose.last.mean_kl,
                    tight.last.mean_kl, loose.last.edit_sim_eval, tight.last.edit_sim_eval, secs)};
}

Outcome component_ablation() {
  constexpr std::array<reward::RewardTerms, 3> kVariants{{{true, false, false}, {true, true, false}, {true, true, true}}};
  int votes = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    std::vector<double> comp;
    for (const auto& v : kVariants) {
      const auto r = completion_run(7 + seed, seed, 0.1, v, comp.empty());
      if (comp.empty()) comp.push_back(r.baseline.comp_rate);
      comp.push_back(r.last.comp_rate_eval);
    }
    bool ok = comp.back() - comp.front() >= 0.10;
    for (std::size_t i = 1; i < comp.size(); ++i) ok = ok && comp[i] >= comp[i - 1];
    votes += ok;
    detail += fmt("%sseed %d: %.3f %.3f %.3f %.3f", detail.empty() ? "" : "; ", static_cast<int>(seed), comp[0], comp[1],
                  comp[2], comp[3]);
  }
  return {votes >= 2, detail + fmt(" (%d of 3 seeds ordered)", votes)};
}

Outcome synthesis_gain() {
  Stopwatch sw;
  constexpr std::uint64_t kSeed = 1;
  auto spec = cli::default_corpus_spec(corpus::TaskKind::Synthesis);
  spec.count = 200;
  const auto tasks = corpus::to_tasks(corpus::generate_corpus(11, spec), corpus::TaskKind::Synthesis, 0);
  spec.count = 2000;
  const auto pre = corpus::to_tasks(corpus::generate_corpus(12, spec), corpus::TaskKind::Synthesis, 0);
  policy::PolicyShape shape;
  shape.window = 24;
  const auto mle = policy::pretrain_mle(policy::init_params(shape, kSeed), corpus::to_examples(pre), {10, 3e-3, 0.0, kSeed});
  const eval::EvalOptions eo{40, 5, 5, 99};
  const double before = eval::evaluate_policy(mle.params, tasks, eo).pass_at_k.at(5);
  ppo::PpoConfig cfg;
  cfg.epochs = 30;
  cfg.beta = 0.05;
  cfg.num_samples = 5;
  cfg.seed = kSeed;
  auto st = ppo::start_training(mle.params);
  ppo::TrainOptions o;
  o.eval_every = cfg.epochs;
  ppo::train(tasks, cfg, st, o);
  const double after = eval::evaluate_policy(st.params, tasks, eo).pass_at_k.at(5);
  const double secs = sw.seconds();
  return {after - before >= 0.10 && secs < 900.0, fmt("pass@5 %.3f -> %.3f, %.0f s", before, after, secs)};
}

Outcome train_determinism() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / ("rlcf-acceptance-" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto spec = cli::default_corpus_spec(corpus::TaskKind::Completion);
  spec.count = 60;
  std::ostringstream log, err;
  const std::string corpus_path = (dir / "corpus.jsonl").string();
  if (cli::cmd_gen_corpus(spec, 7, corpus_path, err) != cli::kExitOk) return {false, err.str()};
  auto run = [&](const std::string& tag) {
    const auto cfg_path = dir / (tag + ".ini");
    std::ofstream(cfg_path) << "[run]\ncorpus = " << corpus_path << "\ncheckpoint_dir = " << (dir / tag).string()
                            << "\nmetrics = " << (dir / (tag + ".jsonl")).string()
                            << "\nmle_epochs = 3\nseed = 4\n\n[ppo]\nepochs = 3\n";
    const int rc = cli::cmd_train(cfg_path.string(), {}, false, log, err);
    return rc == cli::kExitOk ? cli::read_text(dir / (tag + ".jsonl")) : std::string();
  };
  const auto a = run("a"), b = run("b");
  fs::remove_all(dir);
  if (a.empty() || b.empty()) return {false, "train failed: " + err.str()};
  const auto lines = std::count(a.begin(), a.end(), '\n');
  return {a == b, fmt("%ld metrics lines, files %s", static_cast<long>(lines), a == b ? "identical" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::array<std::function<Outcome()>, 11> criteria{
      gradient_check, oracle_agreement, reward_levels,      reward_placement, gae_identity,     clip_table,
      completion_gain, kl_ablation,     component_ablation, synthesis_gain,   train_determinism};
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) {
    const int n = std::atoi(argv[i]);
    if (n < 1 || n > static_cast<int>(criteria.size())) {
      std::fprintf(stderr, "usage: acceptance [criterion 1..%zu]...\n", criteria.size());
      return 2;
    }
    selected.push_back(n);
  }
  if (selected.empty())
    for (int n = 1; n <= static_cast<int>(criteria.size()); ++n) selected.push_back(n);

  bool all = true;
  for (int n : selected) {
    Outcome o;
    try {
      o = criteria[static_cast<std::size_t>(n - 1)]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all = all && o.pass;
    std::printf("criterion %d: %s  %s\n", n, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
