#pragma once

#include <functional>
#include <span>
#include <vector>

#include "s2st/config.hpp"
#include "s2st/corpus.hpp"
#include "s2st/discriminator.hpp"
#include "s2st/generator.hpp"
#include "s2st/nhsmm.hpp"
#include "s2st/template_pool.hpp"

namespace s2st {

// Independent stream for one stage of a seeded run.
Rng stage_rng(std::uint64_t seed, std::uint64_t stage);

// A paired example with its Viterbi-inferred template.
struct TemplatedPair {
  TokenSeq message;
  TokenSeq response;
  Template tpl;
};

// Infers templates for every response. InfeasibleConstraints is rethrown
// with the example index.
std::vector<TemplatedPair> attach_templates(const HsmmParams& hsmm, const std::vector<PairedExample>& paired,
                                            const ConstraintOptions& opts = {});

// Per-token perplexity of teacher-forced responses.
double generator_perplexity(const GeneratorParams& gen, std::span<const TemplatedPair> data);

// Add-one unigram model fit on `train` responses, evaluated on `eval`.
double unigram_perplexity(std::span<const TemplatedPair> train, std::span<const TemplatedPair> eval, int vocab);

struct PretrainReport {
  double initial_val_ppl = 0.0;
  double best_val_ppl = 0.0;
  double unigram_val_ppl = 0.0;
  int epochs_run = 0;
};

// MLE on teacher-forced responses with Viterbi templates; Adam at gen_lr;
// early stopping on validation perplexity. Returns the best parameters.
GeneratorParams pretrain_generator(const GeneratorParams& gen, const HsmmParams& hsmm,
                                   const std::vector<PairedExample>& paired, const TrainConfig& cfg,
                                   PretrainReport* report = nullptr);

// Negatives are top-k samples from the generator under pool-sampled templates.
DiscriminatorParams pretrain_discriminator(const DiscriminatorParams& disc, const GeneratorParams& gen,
                                           const HsmmParams& hsmm, const TemplatePool& pool,
                                           const std::vector<PairedExample>& paired, const TrainConfig& cfg,
                                           Rng& rng);

// Mean discriminator score over `n` completions of `prefix`. A complete
// prefix is scored directly.
double mc_reward(const DiscriminatorParams& disc, const GeneratorParams& gen, const TokenSeq& message,
                 const Template& tpl, const TokenSeq& prefix, int n, int top_k, Rng& rng);

struct PolicyGradient {
  TokenSeq response;          // beam-search output
  std::vector<double> rewards;  // R_t per position
  GeneratorGradient objective;  // value and gradient of sum_t R_t log p(y_t)
};

// Gradient of sum_t rewards[t] * log p(response[t] | ...).
GeneratorGradient reward_weighted_gradient(const GeneratorParams& gen, const TokenSeq& message,
                                           const Template& tpl, const TokenSeq& response,
                                           const std::vector<double>& rewards);

PolicyGradient policy_gradient(const GeneratorParams& gen, const DiscriminatorParams& disc,
                               const TokenSeq& message, const Template& tpl, const TrainConfig& cfg, Rng& rng);

// One Adam ascent step on the policy-gradient objective.
PolicyGradient policy_gradient_step(GeneratorParams& gen, const DiscriminatorParams& disc,
                                    const TokenSeq& message, const Template& tpl, const TrainConfig& cfg,
                                    Adam& adam, Rng& rng);

struct AdversarialResult {
  GeneratorParams generator;
  DiscriminatorParams discriminator;
};

using EpochCallback = std::function<void(int epoch, const GeneratorParams&, const DiscriminatorParams&, Rng&)>;

AdversarialResult adversarial_train(const GeneratorParams& gen, const DiscriminatorParams& disc,
                                    const HsmmParams& hsmm, const TemplatePool& pool,
                                    const std::vector<PairedExample>& paired, const TrainConfig& cfg, Rng& rng,
                                    const EpochCallback& on_epoch = {});

}  // namespace s2st
