#pragma once

#include <span>
#include <string>
#include <vector>

#include "s2st/config.hpp"
#include "s2st/corpus.hpp"
#include "s2st/nn.hpp"

namespace s2st {

struct DiscDims {
  int V = 0;
  int d3 = 64;
  std::vector<int> windows{1, 2, 3};
  int filters = 128;
  int hidden = 128;
  friend bool operator==(const DiscDims&, const DiscDims&) = default;
};

DiscDims disc_dims(const TrainConfig& cfg, int vocab);

// CNN scorer. Message and response share the embedding table but have their
// own filters; max-over-time pooling; one ReLU hidden layer; sigmoid output.
struct DiscriminatorParams {
  DiscDims dims;
  Matrix embeddings;               // V x d3, row kPad stays zero
  std::vector<Matrix> msg_conv;    // per window: filters x (w * d3)
  std::vector<Matrix> msg_bias;    // filters x 1
  std::vector<Matrix> resp_conv;
  std::vector<Matrix> resp_bias;
  Matrix hidden_weight;            // hidden x (2 * |windows| * filters)
  Matrix hidden_bias;              // hidden x 1
  Matrix out_weight;               // 1 x hidden
  Matrix out_bias;                 // 1 x 1

  static DiscriminatorParams zeros(const DiscDims& dims);
  static DiscriminatorParams random(const DiscDims& dims, Rng& rng, double scale);

  template <class F>
  void visit_trainable(F&& f) {
    f("embeddings", embeddings);
    for (std::size_t i = 0; i < msg_conv.size(); ++i) {
      const std::string w = std::to_string(dims.windows[i]);
      f("msg_conv" + w, msg_conv[i]);
      f("msg_bias" + w, msg_bias[i]);
      f("resp_conv" + w, resp_conv[i]);
      f("resp_bias" + w, resp_bias[i]);
    }
    f("hidden_weight", hidden_weight);
    f("hidden_bias", hidden_bias);
    f("out_weight", out_weight);
    f("out_bias", out_bias);
  }
  template <class F>
  void visit(F&& f) {
    visit_trainable(f);
  }
};

// Probability that the response is human-written, clamped to [1e-7, 1 - 1e-7].
double score(const DiscriminatorParams& params, const TokenSeq& message, const TokenSeq& response);

struct DiscTriple {
  TokenSeq message;
  TokenSeq human;
  TokenSeq generated;
};

struct DiscGradient {
  double loss = 0.0;  // -sum [log D(X,Y) + log(1 - D(X,Y^))]
  DiscriminatorParams grad;
};

double disc_loss(const DiscriminatorParams& params, std::span<const DiscTriple> batch);
DiscGradient disc_loss_gradient(const DiscriminatorParams& params, std::span<const DiscTriple> batch);

}  // namespace s2st
