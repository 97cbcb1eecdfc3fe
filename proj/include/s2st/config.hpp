#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

namespace s2st {

// Every knob of the learning pipeline. Default construction gives the
// desk-scale configuration; paper_scale() the full-size model.
struct TrainConfig {
  std::uint64_t seed = 1;

  // Model dimensions.
  int K = 10;
  int D = 4;
  int d1 = 64;
  int d2 = 64;
  int d3 = 64;
  int vocab_size = 20000;
  double init_scale = 0.1;

  // Template model.
  double hsmm_lr = 1e-3;
  int hsmm_batch = 32;
  int hsmm_max_epochs = 20;
  bool demote_long_spans = true;

  // Generator.
  double gen_lr = 1e-5;
  int gen_batch = 16;
  int gen_max_epochs = 20;

  // Discriminator.
  double disc_lr = 1e-3;
  int disc_batch = 16;
  std::vector<int> disc_windows{1, 2, 3};
  int disc_filters = 128;
  int disc_hidden = 128;
  int disc_pretrain_epochs = 1;

  // Early stopping on validation perplexity.
  int patience = 2;
  double rel_tol = 1e-3;
  double val_fraction = 0.1;

  // Adversarial phase.
  int adv_epochs = 5;
  int adv_iters_per_epoch = 20;
  int g_steps = 1;
  int d_steps = 5;
  int rollouts = 5;
  int top_k = 50;
  int beam_width = 5;

  static TrainConfig desk_scale() { return {}; }
  static TrainConfig paper_scale();

  // Throws InvalidConfig.
  void validate() const;
  void validate_for_vocab(int vocab) const;

  nlohmann::json to_json() const;
  // Strict: unknown keys and mistyped values are rejected. Missing keys keep
  // their defaults.
  static TrainConfig from_json(const nlohmann::json& j);

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

}  // namespace s2st
