#pragma once

#include <span>
#include <vector>

#include "s2st/corpus.hpp"
#include "s2st/nhsmm.hpp"
#include "s2st/template_pool.hpp"

namespace s2st {

// Template-conditioned encoder-decoder with attention.
struct GeneratorParams {
  HsmmDims dims;
  GruParams encoder_cell;  // input d3, hidden d2
  GruParams decoder_cell;  // input d2, hidden d2
  Matrix att_v;            // d2 x 1
  Matrix att_w;            // d2 x d2, applied to the decoder state
  Matrix att_u;            // d2 x d2, applied to encoder states
  Matrix att_b;            // d2 x 1
  Matrix out_weight;       // V x 2 d2
  Matrix out_bias;         // V x 1
  // Fine-tuned copy of the NHSMM emission machinery.
  GruParams emission_cell;  // input d1 + d3, hidden d2
  Matrix gates;             // K x d2
  // Frozen, copied from the NHSMM.
  Matrix state_embeddings;  // K x d1
  Matrix word_embeddings;   // V x d3
  Matrix bos_embedding;     // d3 x 1, previous-token input at the first step

  static GeneratorParams zeros(const HsmmDims& dims);
  // Copies the emission machinery and embeddings from `hsmm`; the remaining
  // weights are uniform in [-scale, scale].
  static GeneratorParams from_hsmm(const HsmmParams& hsmm, Rng& rng, double scale);

  template <class F>
  void visit_trainable(F&& f) {
    encoder_cell.visit("encoder_cell.", f);
    decoder_cell.visit("decoder_cell.", f);
    f("att_v", att_v);
    f("att_w", att_w);
    f("att_u", att_u);
    f("att_b", att_b);
    f("out_weight", out_weight);
    f("out_bias", out_bias);
    emission_cell.visit("emission_cell.", f);
    f("gates", gates);
  }
  template <class F>
  void visit_frozen(F&& f) {
    f("state_embeddings", state_embeddings);
    f("word_embeddings", word_embeddings);
    f("bos_embedding", bos_embedding);
  }
  template <class F>
  void visit(F&& f) {
    visit_trainable(f);
    visit_frozen(f);
  }
};

// d2 x L encoder states, column i is h_{X,i+1}.
Matrix encode_message(const GeneratorParams& params, const TokenSeq& message);

struct Attention {
  Vector context;
  Vector weights;
};
Attention attention_context(const GeneratorParams& params, const Vector& s, const Matrix& encoded);

struct TemplatePosition {
  int segment = 0;
  int offset = 0;  // 0-based within the segment
};
// Position of 0-based output step t. Throws TemplateExhausted if t is past the end.
TemplatePosition template_position(const Template& tpl, int t);

struct StepOutput {
  Vector distribution;  // over V
  Vector s;             // decoder state s_t
  Vector o;             // segment hidden o_k
};

// One decoding step. When pos.offset == 0 the segment hidden restarts at 0
// and `o_prev` is ignored. prev_token < 0 means y_0 (BOS).
StepOutput decode_step(const GeneratorParams& params, const Vector& s_prev,
                       const TemplatePosition& pos, const Template& tpl, TokenId prev_token,
                       const Vector& o_prev, const Matrix& encoded);

// Decoder state before the first step: s_0 = h_{X,L}.
Vector initial_decoder_state(const Matrix& encoded);

struct BeamResult {
  TokenSeq tokens;
  double log_prob = 0.0;
};
BeamResult generate_beam(const GeneratorParams& params, const TokenSeq& message,
                         const Template& tpl, int beam_width);

TokenSeq sample_rollout(const GeneratorParams& params, const TokenSeq& message,
                        const Template& tpl, const TokenSeq& prefix, int top_k, Rng& rng);

// Teacher-forced per-step log-probabilities.
std::vector<double> step_logprobs(const GeneratorParams& params, const TokenSeq& message,
                                  const Template& tpl, const TokenSeq& response);
double sequence_logprob(const GeneratorParams& params, const TokenSeq& message,
                        const Template& tpl, const TokenSeq& response);

// One term of a weighted log-likelihood: sum_t weights[t] * log p(response[t]).
struct WeightedSequence {
  TokenSeq message;
  Template tpl;
  TokenSeq response;
  std::vector<double> weights;  // one per response token
};

struct GeneratorGradient {
  double value = 0.0;  // scale * sum of weighted log-probabilities
  GeneratorParams grad;  // gradient of value; frozen parts stay zero
};
GeneratorGradient weighted_logprob_gradient(const GeneratorParams& params,
                                            std::span<const WeightedSequence> batch,
                                            double scale = 1.0);

}  // namespace s2st
