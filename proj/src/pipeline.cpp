#include "s2st/pipeline.hpp"

#include <cmath>
#include <fstream>

#include "s2st/error.hpp"
#include "s2st/log.hpp"
#include "s2st/trainer.hpp"

namespace s2st {
namespace {

// Stage salts for stage_rng.
constexpr std::uint64_t kGenInit = 31, kDiscInit = 32, kDiscPretrain = 33, kAdversarial = 34;

ConstraintOptions constraint_options(const TrainConfig& cfg) { return {cfg.demote_long_spans}; }

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidConfig("run config must be a JSON object");
  RunConfig r;
  for (const auto& [key, value] : j.items()) {
    if (key == "train") {
      r.train = TrainConfig::from_json(value);
    } else if (key == "unpaired" || key == "paired") {
      if (!value.is_string()) throw InvalidConfig("run config: '" + key + "' must be a string");
      (key == "unpaired" ? r.unpaired : r.paired) = value.get<std::string>();
    } else if (key == "no_unpaired") {
      if (!value.is_boolean()) throw InvalidConfig("run config: 'no_unpaired' must be a boolean");
      r.no_unpaired = value.get<bool>();
    } else if (key == "unpaired_fraction") {
      if (!value.is_number()) throw InvalidConfig("run config: 'unpaired_fraction' must be a number");
      r.unpaired_fraction = value.get<double>();
    } else {
      throw InvalidConfig("run config: unknown key '" + key + "'");
    }
  }
  r.validate();
  return r;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig(path.string() + ": " + e.what());
  }
  return from_json(j);
}

nlohmann::json RunConfig::to_json() const {
  return {{"train", train.to_json()},
          {"unpaired", unpaired.string()},
          {"paired", paired.string()},
          {"no_unpaired", no_unpaired},
          {"unpaired_fraction", unpaired_fraction}};
}

void RunConfig::validate() const {
  train.validate();
  if (!(unpaired_fraction > 0.0 && unpaired_fraction <= 1.0)) {
    throw InvalidConfig("run config: unpaired_fraction must be in (0, 1]");
  }
}

namespace {

PipelineData encode_all(const RunConfig& run, const std::vector<RawUnpaired>& raw_u,
                        const std::vector<RawPaired>& raw_p, Vocab vocab) {
  PipelineData d;
  d.vocab = std::move(vocab);
  d.paired = encode_paired(raw_p, d.vocab);
  if (run.no_unpaired) {
    for (const auto& p : d.paired) d.unpaired.push_back({p.response, p.response_spans});
  } else {
    d.unpaired = encode_unpaired(raw_u, d.vocab);
    const auto keep = static_cast<std::size_t>(std::ceil(run.unpaired_fraction * static_cast<double>(d.unpaired.size())));
    d.unpaired.resize(std::min(keep, d.unpaired.size()));
  }
  if (d.paired.empty()) throw EmptyCorpus("no paired examples");
  if (d.unpaired.empty()) throw EmptyCorpus("no sentences for the template model");
  return d;
}

}  // namespace

PipelineData load_data(const RunConfig& run) {
  run.validate();
  std::vector<RawUnpaired> raw_u;
  if (!run.no_unpaired) raw_u = read_unpaired(run.unpaired);
  const std::vector<RawPaired> raw_p = read_paired(run.paired);
  std::vector<std::string> texts;
  for (const auto& u : raw_u) texts.push_back(u.text);
  for (const auto& p : raw_p) {
    texts.push_back(p.message);
    texts.push_back(p.response);
  }
  return encode_all(run, raw_u, raw_p, build_vocab(texts, run.train.vocab_size));
}

PipelineData load_data(const RunConfig& run, const Vocab& vocab) {
  run.validate();
  std::vector<RawUnpaired> raw_u;
  if (!run.no_unpaired) raw_u = read_unpaired(run.unpaired);
  return encode_all(run, raw_u, read_paired(run.paired), vocab);
}

ModelBundle stage_hsmm(const RunConfig& run, const PipelineData& data) {
  run.train.validate_for_vocab(data.vocab.size());
  ModelBundle b;
  b.config = run.train;
  b.vocab = data.vocab;
  b.hsmm = train_nhsmm(data.unpaired, run.train, data.vocab.size());
  return b;
}

void stage_pool(ModelBundle& b, const PipelineData& data) {
  if (!b.hsmm) throw InvalidConfig("building a pool needs a trained template model");
  b.pool = build_pool(*b.hsmm, data.unpaired, constraint_options(b.config));
}

void stage_pretrain(ModelBundle& b, const PipelineData& data) {
  if (!b.hsmm || !b.pool) throw InvalidConfig("pretraining needs a template model and a pool");
  const TrainConfig& cfg = b.config;
  Rng init = stage_rng(cfg.seed, kGenInit);
  GeneratorParams gen = GeneratorParams::from_hsmm(*b.hsmm, init, cfg.init_scale);
  PretrainReport rep;
  b.generator = pretrain_generator(gen, *b.hsmm, data.paired, cfg, &rep);
  b.extras["pretrain"] = {{"initial_val_ppl", rep.initial_val_ppl},
                          {"best_val_ppl", rep.best_val_ppl},
                          {"unigram_val_ppl", rep.unigram_val_ppl},
                          {"epochs_run", rep.epochs_run}};
  Rng dinit = stage_rng(cfg.seed, kDiscInit);
  DiscriminatorParams disc = DiscriminatorParams::random(disc_dims(cfg, b.vocab.size()), dinit, cfg.init_scale);
  Rng drng = stage_rng(cfg.seed, kDiscPretrain);
  b.discriminator = pretrain_discriminator(disc, *b.generator, *b.hsmm, *b.pool, data.paired, cfg, drng);
}

void stage_adversarial(ModelBundle& b, const PipelineData& data, const BundleCallback& on_epoch) {
  if (!b.hsmm || !b.pool || !b.generator || !b.discriminator) {
    throw InvalidConfig("adversarial training needs a pretrained bundle");
  }
  Rng rng = stage_rng(b.config.seed, kAdversarial);
  EpochCallback cb;
  if (on_epoch) {
    cb = [&](int epoch, const GeneratorParams& g, const DiscriminatorParams& d, Rng& r) {
      ModelBundle snap = b;
      snap.generator = g;
      snap.discriminator = d;
      snap.rng_state = rng_to_string(r);
      snap.extras["adv_epoch"] = epoch;
      on_epoch(epoch, snap);
    };
  }
  AdversarialResult r = adversarial_train(*b.generator, *b.discriminator, *b.hsmm, *b.pool, data.paired, b.config, rng, cb);
  b.generator = std::move(r.generator);
  b.discriminator = std::move(r.discriminator);
  b.rng_state = rng_to_string(rng);
  b.extras["adv_epoch"] = b.config.adv_epochs;
}

ModelBundle run_pipeline(const RunConfig& run, const PipelineData& data, const BundleCallback& on_epoch) {
  ModelBundle b = stage_hsmm(run, data);
  stage_pool(b, data);
  stage_pretrain(b, data);
  stage_adversarial(b, data, on_epoch);
  return b;
}

TokenSeq generate_response(const ModelBundle& b, const TokenSeq& message, Rng& rng) {
  if (!b.hsmm || !b.pool || !b.generator) throw InvalidConfig("generation needs a template model, pool and generator");
  const Template tpl = sample_template(*b.pool, *b.hsmm, rng);
  return generate_beam(*b.generator, message, tpl, b.config.beam_width).tokens;
}

}  // namespace s2st
