#pragma once

#include <span>
#include <string>
#include <vector>

#include "s2st/config.hpp"
#include "s2st/corpus.hpp"
#include "s2st/nn.hpp"

namespace s2st {

struct HsmmDims {
  int K = 10;  // states
  int D = 4;   // maximum segment duration
  int V = 0;   // vocabulary
  int d1 = 64; // state embedding
  int d2 = 64; // emission hidden
  int d3 = 64; // word embedding
  friend bool operator==(const HsmmDims&, const HsmmDims&) = default;
};

// Neural hidden semi-Markov model. States are 0-based. Durations are uniform
// on {1..D}. The transition matrix is softmax_j(e_j . e_i + b_ij) with the
// diagonal of b fixed at -inf.
struct HsmmParams {
  HsmmDims dims;
  Matrix state_embeddings;    // K x d1
  Matrix transition_bias;     // K x K
  Matrix init_logits;         // K x 1
  Matrix gates;               // K x d2
  GruParams emission_cell;    // input d1 + d3, hidden d2
  Matrix word_embeddings;     // V x d3
  Matrix segstart_embedding;  // d3 x 1, previous-word input at a segment start
  Matrix out_weight;          // V x d2
  Matrix out_bias;            // V x 1

  static HsmmParams zeros(const HsmmDims& dims);
  static HsmmParams random(const HsmmDims& dims, Rng& rng, double scale);

  template <class F>
  void visit_trainable(F&& f) {
    f("state_embeddings", state_embeddings);
    f("transition_bias", transition_bias);
    f("init_logits", init_logits);
    f("gates", gates);
    emission_cell.visit("emission_cell.", f);
    f("word_embeddings", word_embeddings);
    f("segstart_embedding", segstart_embedding);
    f("out_weight", out_weight);
    f("out_bias", out_bias);
  }
  template <class F>
  void visit(F&& f) {
    visit_trainable(f);
  }
};

struct SegmentEntry {
  int state = 0;
  int duration = 1;
  friend bool operator==(const SegmentEntry&, const SegmentEntry&) = default;
};

struct Segmentation {
  std::vector<SegmentEntry> segments;
  double log_joint = 0.0;
};

// Controls how protected spans are turned into forbidden cuts.
struct ConstraintOptions {
  // Spans longer than D cannot stay whole; when true they are dropped with a
  // warning, otherwise InfeasibleConstraints is raised.
  bool demote_long_spans = true;
};

// allowed[c] is false when a boundary after c tokens would fall strictly
// inside a protected span. Size S + 1; both ends are always allowed.
std::vector<char> allowed_cuts(int length, const ProtectedSpans& spans, int max_duration,
                               const ConstraintOptions& opts = {});

Matrix transition_matrix(const HsmmParams& params);
Matrix log_transition_matrix(const HsmmParams& params);
Vector initial_distribution(const HsmmParams& params);

// log P(tokens | state, |tokens|) for one segment.
double emission_segment_logprob(const HsmmParams& params, int state,
                                std::span<const TokenId> tokens);

// Distribution of the next token of a segment emitted by `state`, given the
// tokens already emitted in that segment.
Vector emission_next_distribution(const HsmmParams& params, int state,
                                  std::span<const TokenId> segment_prefix);

double backward_marginal_loglik(const HsmmParams& params, const TokenSeq& seq,
                                const ProtectedSpans& spans = {},
                                const ConstraintOptions& opts = {});

Segmentation viterbi_segment(const HsmmParams& params, const TokenSeq& seq,
                             const ProtectedSpans& spans = {},
                             const ConstraintOptions& opts = {});

// Joint log-probability of a given segmentation, scored term by term.
double segmentation_log_joint(const HsmmParams& params, const TokenSeq& seq,
                              const std::vector<SegmentEntry>& segments);

struct NllGradient {
  double loss = 0.0;  // mean negative log marginal likelihood
  HsmmParams grad;
};

NllGradient nll_gradient(const HsmmParams& params, std::span<const UnpairedExample> batch,
                         const ConstraintOptions& opts = {});

// Mean NLL and perplexity (per token) over a corpus, without gradients.
struct CorpusLikelihood {
  double total_nll = 0.0;
  long tokens = 0;
  std::size_t sentences = 0;
  double mean_nll() const { return sentences ? total_nll / static_cast<double>(sentences) : 0.0; }
  double perplexity() const;
};
CorpusLikelihood corpus_likelihood(const HsmmParams& params,
                                   std::span<const UnpairedExample> corpus,
                                   const ConstraintOptions& opts = {});

HsmmDims hsmm_dims(const TrainConfig& cfg, int vocab);

// Adam on the mean NLL with early stopping on held-out perplexity. Returns
// the best-validation parameters (the initialization when max_epochs = 0).
HsmmParams train_nhsmm(const std::vector<UnpairedExample>& corpus, const TrainConfig& cfg,
                       const HsmmParams& init);
HsmmParams train_nhsmm(const std::vector<UnpairedExample>& corpus, const TrainConfig& cfg,
                       int vocab);

// Seeded train/validation split used by every trainer.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> valid;
};
Split split_indices(std::size_t n, double val_fraction, Rng& rng);

namespace dp {

// Score tables for one sequence, everything in log space.
struct Tables {
  int S = 0, K = 0, D = 0;
  Matrix log_trans;  // K x K, row = from
  Vector log_init;   // K
  // emission[(a * D + (d - 1)) * K + k]: segment starting at a with duration d.
  std::vector<double> emission;
  std::vector<char> cut_allowed;  // S + 1

  double& em(int a, int d, int k) { return emission[(static_cast<std::size_t>(a) * D + (d - 1)) * K + k]; }
  double em(int a, int d, int k) const { return emission[(static_cast<std::size_t>(a) * D + (d - 1)) * K + k]; }
};

struct Adjoint {
  Matrix log_trans;
  Vector log_init;
  std::vector<double> emission;
};

// Backward recursion; fills `adj` with d(log P)/d(table entries) if given.
double log_marginal(const Tables& t, Adjoint* adj = nullptr);
Segmentation best_path(const Tables& t);

}  // namespace dp
}  // namespace s2st
