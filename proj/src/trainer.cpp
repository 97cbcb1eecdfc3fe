#include "s2st/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "s2st/error.hpp"
#include "s2st/log.hpp"

namespace s2st {
namespace {

// Tracks the best value and how long it has been since a significant gain.
class EarlyStop {
 public:
  EarlyStop(double initial, int patience, double rel_tol)
      : best_(initial), ref_(initial), patience_(patience), rel_tol_(rel_tol) {}

  // Returns true when `value` is a new best.
  bool update(double value) {
    const bool improved = value < best_;
    if (improved) best_ = value;
    if (value < ref_ * (1.0 - rel_tol_)) {
      ref_ = value;
      stale_ = 0;
    } else {
      ++stale_;
    }
    return improved;
  }
  bool stop() const { return stale_ >= patience_; }
  double best() const { return best_; }

 private:
  double best_, ref_;
  int patience_;
  double rel_tol_;
  int stale_ = 0;
};

std::vector<WeightedSequence> teacher_batch(std::span<const TemplatedPair> data, std::span<const std::size_t> idx) {
  std::vector<WeightedSequence> out;
  for (std::size_t i : idx) {
    const auto& d = data[i];
    out.push_back({d.message, d.tpl, d.response, std::vector<double>(d.response.size(), 1.0)});
  }
  return out;
}

std::vector<TemplatedPair> select(const std::vector<TemplatedPair>& data, const std::vector<std::size_t>& idx) {
  std::vector<TemplatedPair> out;
  for (std::size_t i : idx) out.push_back(data[i]);
  return out;
}

}  // namespace

Rng stage_rng(std::uint64_t seed, std::uint64_t stage) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stage)};
  return Rng(seq);
}

std::vector<TemplatedPair> attach_templates(const HsmmParams& hsmm, const std::vector<PairedExample>& paired,
                                            const ConstraintOptions& opts) {
  std::vector<TemplatedPair> out;
  out.reserve(paired.size());
  for (std::size_t i = 0; i < paired.size(); ++i) {
    try {
      out.push_back({paired[i].message, paired[i].response,
                     infer_template(hsmm, paired[i].response, paired[i].response_spans, opts)});
    } catch (const InfeasibleConstraints& e) {
      throw InfeasibleConstraints("paired example " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

double generator_perplexity(const GeneratorParams& gen, std::span<const TemplatedPair> data) {
  double nll = 0.0;
  long tokens = 0;
  for (const auto& d : data) {
    nll -= sequence_logprob(gen, d.message, d.tpl, d.response);
    tokens += static_cast<long>(d.response.size());
  }
  return tokens ? std::exp(nll / static_cast<double>(tokens)) : 1.0;
}

double unigram_perplexity(std::span<const TemplatedPair> train, std::span<const TemplatedPair> eval, int vocab) {
  std::vector<double> counts(static_cast<std::size_t>(vocab), 1.0);
  double total = vocab;
  for (const auto& d : train) {
    for (TokenId t : d.response) {
      counts[static_cast<std::size_t>(t)] += 1;
      total += 1;
    }
  }
  double nll = 0.0;
  long tokens = 0;
  for (const auto& d : eval) {
    for (TokenId t : d.response) {
      nll -= std::log(counts[static_cast<std::size_t>(t)] / total);
      ++tokens;
    }
  }
  return tokens ? std::exp(nll / static_cast<double>(tokens)) : 1.0;
}

GeneratorParams pretrain_generator(const GeneratorParams& gen, const HsmmParams& hsmm,
                                   const std::vector<PairedExample>& paired, const TrainConfig& cfg,
                                   PretrainReport* report) {
  if (paired.empty()) throw EmptyCorpus("pretrain_generator: no paired data");
  cfg.validate();
  const std::vector<TemplatedPair> all = attach_templates(hsmm, paired, {cfg.demote_long_spans});
  Rng rng = stage_rng(cfg.seed, 21);
  const Split split = split_indices(all.size(), cfg.val_fraction, rng);
  const std::vector<TemplatedPair> valid = select(all, split.valid);
  const std::vector<TemplatedPair> train = select(all, split.train);

  GeneratorParams params = gen;
  GeneratorParams best = gen;
  const double init_ppl = generator_perplexity(gen, valid);
  PretrainReport rep;
  rep.initial_val_ppl = init_ppl;
  rep.unigram_val_ppl = unigram_perplexity(train, valid, gen.dims.V);
  log_event({{"phase", "pretrain_g"}, {"epoch", 0}, {"val_ppl", init_ppl},
             {"unigram_ppl", rep.unigram_val_ppl}, {"wall_ms", wall_clock_ms()}});
  EarlyStop es(init_ppl, cfg.patience, cfg.rel_tol);
  Adam adam(cfg.gen_lr);
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (int epoch = 1; epoch <= cfg.gen_max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    long epoch_tokens = 0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.gen_batch)) {
      const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(cfg.gen_batch));
      std::vector<WeightedSequence> batch =
          teacher_batch(train, std::span<const std::size_t>(order).subspan(b, e - b));
      long tokens = 0;
      for (const auto& w : batch) tokens += static_cast<long>(w.response.size());
      // Minimise the mean per-token NLL of the batch.
      GeneratorGradient g = weighted_logprob_gradient(params, batch, -1.0 / static_cast<double>(tokens));
      adam.step(param_pointers(params), grad_pointers(g.grad));
      epoch_loss += g.value * static_cast<double>(tokens);
      epoch_tokens += tokens;
    }
    const double ppl = generator_perplexity(params, valid);
    rep.epochs_run = epoch;
    log_event({{"phase", "pretrain_g"},
               {"epoch", epoch},
               {"step", adam.steps()},
               {"loss", epoch_loss / static_cast<double>(std::max<long>(1, epoch_tokens))},
               {"val_ppl", ppl},
               {"wall_ms", wall_clock_ms()}});
    if (!std::isfinite(ppl)) throw NumericalError("generator validation perplexity is not finite");
    if (es.update(ppl)) best = params;
    if (es.stop()) break;
  }
  rep.best_val_ppl = es.best();
  if (report) *report = rep;
  return best;
}

namespace {

DiscTriple make_triple(const GeneratorParams& gen, const HsmmParams& hsmm, const TemplatePool& pool,
                       const PairedExample& ex, int top_k, Rng& rng) {
  const Template tpl = sample_template(pool, hsmm, rng);
  return {ex.message, ex.response, sample_rollout(gen, ex.message, tpl, {}, top_k, rng)};
}

}  // namespace

DiscriminatorParams pretrain_discriminator(const DiscriminatorParams& disc, const GeneratorParams& gen,
                                           const HsmmParams& hsmm, const TemplatePool& pool,
                                           const std::vector<PairedExample>& paired, const TrainConfig& cfg,
                                           Rng& rng) {
  if (paired.empty()) throw EmptyCorpus("pretrain_discriminator: no paired data");
  DiscriminatorParams params = disc;
  Adam adam(cfg.disc_lr);
  const int top_k = std::min(cfg.top_k, gen.dims.V);
  std::vector<std::size_t> order(paired.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (int epoch = 1; epoch <= cfg.disc_pretrain_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.disc_batch)) {
      const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(cfg.disc_batch));
      std::vector<DiscTriple> batch;
      for (std::size_t i = b; i < e; ++i) batch.push_back(make_triple(gen, hsmm, pool, paired[order[i]], top_k, rng));
      DiscGradient g = disc_loss_gradient(params, batch);
      adam.step(param_pointers(params), grad_pointers(g.grad));
      total += g.loss;
    }
    log_event({{"phase", "pretrain_d"},
               {"epoch", epoch},
               {"step", adam.steps()},
               {"loss", total / static_cast<double>(paired.size())},
               {"wall_ms", wall_clock_ms()}});
  }
  return params;
}

double mc_reward(const DiscriminatorParams& disc, const GeneratorParams& gen, const TokenSeq& message,
                 const Template& tpl, const TokenSeq& prefix, int n, int top_k, Rng& rng) {
  if (n < 1) throw InvalidConfig("rollout count must be >= 1");
  if (static_cast<int>(prefix.size()) == tpl.total_len()) return score(disc, message, prefix);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    Rng sub = derive_rng(rng);
    total += score(disc, message, sample_rollout(gen, message, tpl, prefix, top_k, sub));
  }
  return total / n;
}

GeneratorGradient reward_weighted_gradient(const GeneratorParams& gen, const TokenSeq& message,
                                           const Template& tpl, const TokenSeq& response,
                                           const std::vector<double>& rewards) {
  const WeightedSequence ws{message, tpl, response, rewards};
  return weighted_logprob_gradient(gen, std::span(&ws, 1));
}

PolicyGradient policy_gradient(const GeneratorParams& gen, const DiscriminatorParams& disc,
                               const TokenSeq& message, const Template& tpl, const TrainConfig& cfg, Rng& rng) {
  PolicyGradient pg;
  pg.response = generate_beam(gen, message, tpl, cfg.beam_width).tokens;
  const int top_k = std::min(cfg.top_k, gen.dims.V);
  for (std::size_t t = 1; t <= pg.response.size(); ++t) {
    const TokenSeq prefix(pg.response.begin(), pg.response.begin() + static_cast<std::ptrdiff_t>(t));
    pg.rewards.push_back(mc_reward(disc, gen, message, tpl, prefix, cfg.rollouts, top_k, rng));
  }
  pg.objective = reward_weighted_gradient(gen, message, tpl, pg.response, pg.rewards);
  return pg;
}

PolicyGradient policy_gradient_step(GeneratorParams& gen, const DiscriminatorParams& disc,
                                    const TokenSeq& message, const Template& tpl, const TrainConfig& cfg,
                                    Adam& adam, Rng& rng) {
  PolicyGradient pg = policy_gradient(gen, disc, message, tpl, cfg, rng);
  // Adam minimises, so step on the negated objective.
  GeneratorParams neg = pg.objective.grad;
  neg.visit_trainable([](const std::string&, Matrix& m) { m = -m; });
  adam.step(param_pointers(gen), grad_pointers(neg));
  return pg;
}

AdversarialResult adversarial_train(const GeneratorParams& gen, const DiscriminatorParams& disc,
                                    const HsmmParams& hsmm, const TemplatePool& pool,
                                    const std::vector<PairedExample>& paired, const TrainConfig& cfg, Rng& rng,
                                    const EpochCallback& on_epoch) {
  AdversarialResult r{gen, disc};
  if (cfg.adv_epochs == 0 || cfg.adv_iters_per_epoch == 0) return r;
  if (paired.empty()) throw EmptyCorpus("adversarial_train: no paired data");
  if (pool.empty()) throw EmptyPool("adversarial_train: empty template pool");
  Adam g_adam(cfg.gen_lr), d_adam(cfg.disc_lr);
  const int top_k = std::min(cfg.top_k, gen.dims.V);
  std::uniform_int_distribution<std::size_t> pick(0, paired.size() - 1);
  for (int epoch = 1; epoch <= cfg.adv_epochs; ++epoch) {
    double reward_sum = 0.0, d_loss = 0.0;
    long reward_n = 0, d_n = 0;
    for (int it = 0; it < cfg.adv_iters_per_epoch; ++it) {
      try {
        for (int g = 0; g < cfg.g_steps; ++g) {
          const PairedExample& ex = paired[pick(rng)];
          const Template tpl = sample_template(pool, hsmm, rng);
          PolicyGradient pg = policy_gradient_step(r.generator, r.discriminator, ex.message, tpl, cfg, g_adam, rng);
          for (double x : pg.rewards) reward_sum += x;
          reward_n += static_cast<long>(pg.rewards.size());
        }
        for (int d = 0; d < cfg.d_steps; ++d) {
          std::vector<DiscTriple> batch;
          for (int i = 0; i < cfg.disc_batch; ++i) {
            batch.push_back(make_triple(r.generator, hsmm, pool, paired[pick(rng)], top_k, rng));
          }
          DiscGradient dg = disc_loss_gradient(r.discriminator, batch);
          d_adam.step(param_pointers(r.discriminator), grad_pointers(dg.grad));
          d_loss += dg.loss;
          d_n += static_cast<long>(batch.size());
        }
      } catch (const Error& e) {
        log_event({{"level", "error"}, {"phase", "adv"}, {"epoch", epoch}, {"iteration", it}, {"msg", e.what()}});
        throw;
      }
    }
    log_event({{"phase", "adv"},
               {"epoch", epoch},
               {"step", g_adam.steps()},
               {"reward_mean", reward_n ? reward_sum / static_cast<double>(reward_n) : 0.0},
               {"disc_loss", d_n ? d_loss / static_cast<double>(d_n) : 0.0},
               {"wall_ms", wall_clock_ms()}});
    if (on_epoch) on_epoch(epoch, r.generator, r.discriminator, rng);
  }
  return r;
}

}  // namespace s2st
