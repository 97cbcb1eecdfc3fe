#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "s2st/config.hpp"
#include "s2st/corpus.hpp"
#include "s2st/persistence.hpp"

namespace s2st {

// Everything a run needs besides the command: the training knobs, data
// locations and ablation switches.
struct RunConfig {
  TrainConfig train;
  std::filesystem::path unpaired;  // JSONL, {"text", "spans"}
  std::filesystem::path paired;    // JSONL, {"message", "response", "response_spans"}
  // Ablations: train the template model on paired responses only, or on a
  // leading fraction of the unpaired corpus.
  bool no_unpaired = false;
  double unpaired_fraction = 1.0;

  // Strict: unknown keys and mistyped values raise InvalidConfig.
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  void validate() const;
};

struct PipelineData {
  Vocab vocab;
  std::vector<UnpairedExample> unpaired;  // after ablations
  std::vector<PairedExample> paired;
};

// Builds the vocabulary over every text and encodes both corpora.
PipelineData load_data(const RunConfig& run);
// Same, with an already fixed vocabulary.
PipelineData load_data(const RunConfig& run, const Vocab& vocab);

// Stages; each consumes and extends a bundle.
ModelBundle stage_hsmm(const RunConfig& run, const PipelineData& data);
void stage_pool(ModelBundle& bundle, const PipelineData& data);
void stage_pretrain(ModelBundle& bundle, const PipelineData& data);
// Called with the bundle as it stands after each adversarial epoch.
using BundleCallback = std::function<void(int epoch, const ModelBundle&)>;
void stage_adversarial(ModelBundle& bundle, const PipelineData& data, const BundleCallback& on_epoch = {});

ModelBundle run_pipeline(const RunConfig& run, const PipelineData& data, const BundleCallback& on_epoch = {});

// Pool-sampled template plus beam search.
TokenSeq generate_response(const ModelBundle& bundle, const TokenSeq& message, Rng& rng);

}  // namespace s2st
