// Library walkthrough: generate a completion corpus, warm-start the policy
// with MLE, fine-tune with PPO and show one completion before and after.
//
//   rlcf_example [epochs]

#include <cstdio>
#include <cstdlib>

#include "rlcf/corpus.hpp"
#include "rlcf/eval.hpp"
#include "rlcf/ppo.hpp"

using namespace rlcf;

int main(int argc, char** argv) {
  const int epochs = argc > 1 ? std::atoi(argv[1]) : 5;

  corpus::CorpusSpec spec;
  spec.count = 200;
  spec.min_tokens = 8;
  spec.max_tokens = 50;
  spec.gen = {3, 5, 2, 2};
  const auto tasks = corpus::to_tasks(corpus::generate_corpus(7, spec), corpus::TaskKind::Completion, spec.mask_len);

  const auto mle = policy::pretrain_mle(policy::init_params({}, 1), corpus::to_examples(tasks), {});
  std::printf("mle loss %.3f -> %.3f\n", mle.epoch_loss.front(), mle.epoch_loss.back());

  ppo::PpoConfig cfg;
  cfg.epochs = epochs;
  const auto before = eval::evaluate_policy(mle.params, tasks, {cfg.max_len, 0, cfg.top_k, 0});
  std::printf("pretrained  comp_rate %.3f  edit_sim %.3f\n", before.comp_rate, before.edit_sim);

  auto state = ppo::start_training(mle.params);
  ppo::TrainOptions opts;
  opts.on_epoch = [](const ppo::TrainState&, const ppo::EpochMetrics& m) {
    std::printf("epoch %2d  reward %+.3f  kl %.3f  comp_rate %.3f  edit_sim %.3f\n", m.epoch, m.mean_reward, m.mean_kl,
                m.comp_rate_eval, m.edit_sim_eval);
  };
  ppo::train(tasks, cfg, state, opts);

  const Task& t = tasks.front();
  std::printf("\nprefix     %s\n", detokenize(t.source).c_str());
  std::printf("reference  %s\n", detokenize(t.target).c_str());
  std::printf("pretrained %s\n", detokenize(policy::decode_greedy(mle.params, t.source, cfg.max_len)).c_str());
  std::printf("fine-tuned %s\n", detokenize(policy::decode_greedy(state.params, t.source, cfg.max_len)).c_str());
}
