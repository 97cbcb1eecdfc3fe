#include "s2st/nhsmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "s2st/error.hpp"
#include "s2st/log.hpp"

namespace s2st {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
// Scores closer than this are treated as equal by the Viterbi tie-break.
constexpr double kTieTolerance = 1e-9;

double log_sum_exp(std::span<const double> xs) {
  double m = kNegInf;
  for (double x : xs) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

struct HsmmVars {
  ad::Var state_emb, trans_bias, init_logits, gates, word_emb, segstart, out_w, out_b;
  GruVars cell;
};

HsmmVars bind(ad::Tape& t, const HsmmParams& p, HsmmParams* g) {
  HsmmVars v;
  v.state_emb = t.leaf(p.state_embeddings, g ? &g->state_embeddings : nullptr);
  v.trans_bias = t.leaf(p.transition_bias, g ? &g->transition_bias : nullptr);
  v.init_logits = t.leaf(p.init_logits, g ? &g->init_logits : nullptr);
  v.gates = t.leaf(p.gates, g ? &g->gates : nullptr);
  v.word_emb = t.leaf(p.word_embeddings, g ? &g->word_embeddings : nullptr);
  v.segstart = t.leaf(p.segstart_embedding, g ? &g->segstart_embedding : nullptr);
  v.out_w = t.leaf(p.out_weight, g ? &g->out_weight : nullptr);
  v.out_b = t.leaf(p.out_bias, g ? &g->out_bias : nullptr);
  v.cell = GruVars::bind(t, p.emission_cell, g ? &g->emission_cell : nullptr);
  return v;
}

// Log-transition matrix stored transposed: column i holds log A(i, .).
ad::Var log_transitions_t(const HsmmVars& v) {
  using namespace ad;
  Var scores = add(matmul(v.state_emb, transpose(v.state_emb)), v.trans_bias);
  return log_softmax_cols(transpose(scores));
}

// Runs the emission network for every state at once over segments of one
// sequence. The input at segment position j is [e_z; e_prev] where e_prev is
// the segment-start embedding for j = 0 and the previous token otherwise.
class EmissionRunner {
 public:
  EmissionRunner(const HsmmVars& v, const HsmmDims& dims, std::span<const TokenId> seq)
      : v_(v), dims_(dims) {
    using namespace ad;
    Var et = transpose(v.state_emb);
    const GruVars& c = v.cell;
    const Var w[3] = {c.wz, c.wr, c.wn};
    const Var b[3] = {c.bz, c.br, c.bn};
    std::vector<int> ids(seq.begin(), seq.end());
    Var x;
    if (!ids.empty()) x = gather_rows(v.word_emb, ids);
    for (int g = 0; g < 3; ++g) {
      Var ws = block(w[g], 0, 0, dims.d2, dims.d1);
      Var wy = block(w[g], 0, dims.d1, dims.d2, dims.d3);
      state_part_[g] = matmul(ws, et);
      start_part_[g] = add_bias(matmul(wy, v.segstart), b[g]);
      if (!ids.empty()) token_part_[g] = add_bias(matmul(wy, x), b[g]);
    }
    gates_t_ = transpose(v.gates);
    h0_ = v.state_emb.tape->zeros(dims.d2, dims.K);
  }

  // Log-probability matrices (V x K), one per segment position.
  std::vector<ad::Var> run(int start, int len) {
    using namespace ad;
    std::vector<Var> out;
    out.reserve(static_cast<std::size_t>(len));
    Var h = h0_;
    for (int j = 0; j < len; ++j) {
      if (j == 0) {
        if (!first_cached_) {
          first_h_ = step(h0_, start_part_);
          first_lp_ = log_probs(first_h_);
          first_cached_ = true;
        }
        h = first_h_;
        out.push_back(first_lp_);
        continue;
      }
      const Eigen::Index prev = start + j - 1;
      const Var prev_in[3] = {col(token_part_[0], prev), col(token_part_[1], prev),
                              col(token_part_[2], prev)};
      h = step(h, prev_in);
      out.push_back(log_probs(h));
    }
    return out;
  }

 private:
  ad::Var step(ad::Var h, const ad::Var (&prev)[3]) {
    using namespace ad;
    GruInputs in{add_bias(state_part_[0], prev[0]), add_bias(state_part_[1], prev[1]),
                 add_bias(state_part_[2], prev[2])};
    return gru_step(v_.cell, h, in);
  }

  ad::Var log_probs(ad::Var h) {
    using namespace ad;
    Var gated = mul(h, gates_t_);
    return log_softmax_cols(add_bias(matmul(v_.out_w, gated), v_.out_b));
  }

  const HsmmVars& v_;
  HsmmDims dims_;
  ad::Var state_part_[3], start_part_[3], token_part_[3];
  ad::Var gates_t_, h0_;
  bool first_cached_ = false;
  ad::Var first_h_, first_lp_;
};

// Builds DP tables on a tape. `picked[a][j]` (1 x K) holds the per-position
// log-probabilities that make up the emission entries, for later seeding.
struct TapeTables {
  dp::Tables tables;
  ad::Var log_trans_t, log_init;
  std::vector<std::vector<ad::Var>> picked;
};

TapeTables build_tables(const HsmmVars& v, const HsmmDims& dims, const TokenSeq& seq,
                        const ProtectedSpans& spans, const ConstraintOptions& opts) {
  using namespace ad;
  const int S = static_cast<int>(seq.size());
  const int K = dims.K, D = dims.D;
  TapeTables out;
  dp::Tables& t = out.tables;
  t.S = S;
  t.K = K;
  t.D = D;
  t.cut_allowed = allowed_cuts(S, spans, D, opts);
  out.log_trans_t = log_transitions_t(v);
  t.log_trans = out.log_trans_t.value().transpose();
  out.log_init = log_softmax_cols(v.init_logits);
  t.log_init = out.log_init.value().col(0);
  t.emission.assign(static_cast<std::size_t>(S) * D * K, kNegInf);

  EmissionRunner runner(v, dims, seq);
  out.picked.resize(static_cast<std::size_t>(S));
  for (int a = 0; a < S; ++a) {
    if (!t.cut_allowed[a]) continue;
    const int len = std::min(D, S - a);
    std::vector<Var> lps = runner.run(a, len);
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(K);
    for (int j = 0; j < len; ++j) {
      Var r = row(lps[j], seq[a + j]);
      out.picked[a].push_back(r);
      acc += r.value().row(0);
      for (int k = 0; k < K; ++k) t.em(a, j + 1, k) = acc(k);
    }
  }
  return out;
}

void validate_sequence(const HsmmParams& params, const TokenSeq& seq) {
  if (seq.empty()) throw EmptySentence("NHSMM: empty sequence");
  for (TokenId id : seq) {
    if (id < 0 || id >= params.dims.V) {
      throw InvalidConfig("NHSMM: token id " + std::to_string(id) + " outside vocabulary");
    }
  }
}

}  // namespace

double CorpusLikelihood::perplexity() const {
  return tokens ? std::exp(total_nll / static_cast<double>(tokens)) : 1.0;
}

HsmmParams HsmmParams::zeros(const HsmmDims& d) {
  if (d.K < 2) throw InvalidConfig("NHSMM needs K >= 2 (self-transitions are disabled)");
  if (d.D < 1 || d.V < 1) throw InvalidConfig("NHSMM needs D >= 1 and V >= 1");
  HsmmParams p;
  p.dims = d;
  p.state_embeddings = Matrix::Zero(d.K, d.d1);
  p.transition_bias = Matrix::Zero(d.K, d.K);
  p.transition_bias.diagonal().setConstant(kNegInf);
  p.init_logits = Matrix::Zero(d.K, 1);
  p.gates = Matrix::Zero(d.K, d.d2);
  p.emission_cell = GruParams::zeros(d.d1 + d.d3, d.d2);
  p.word_embeddings = Matrix::Zero(d.V, d.d3);
  p.segstart_embedding = Matrix::Zero(d.d3, 1);
  p.out_weight = Matrix::Zero(d.V, d.d2);
  p.out_bias = Matrix::Zero(d.V, 1);
  return p;
}

HsmmParams HsmmParams::random(const HsmmDims& d, Rng& rng, double scale) {
  HsmmParams p = zeros(d);
  p.visit_trainable([&](const std::string& name, Matrix& m) {
    if (name == "init_logits") return;  // uniform initial distribution
    fill_uniform(m, rng, scale);
  });
  p.transition_bias.diagonal().setConstant(kNegInf);
  return p;
}

std::vector<char> allowed_cuts(int length, const ProtectedSpans& spans, int max_duration,
                               const ConstraintOptions& opts) {
  std::vector<char> allowed(static_cast<std::size_t>(length) + 1, 1);
  for (const Span& s : spans) {
    if (s.begin < 0 || s.end > length || s.end <= s.begin) {
      throw ParseError("protected span out of bounds");
    }
    if (s.end - s.begin > max_duration) {
      if (!opts.demote_long_spans) {
        throw InfeasibleConstraints("protected span [" + std::to_string(s.begin) + "," +
                                    std::to_string(s.end) + ") is longer than D = " +
                                    std::to_string(max_duration));
      }
      log_event({{"level", "warn"},
                 {"msg", "protected span longer than max duration; left unprotected"},
                 {"span", {s.begin, s.end}},
                 {"D", max_duration}});
      continue;
    }
    for (int c = s.begin + 1; c < s.end; ++c) allowed[static_cast<std::size_t>(c)] = 0;
  }
  return allowed;
}

Matrix log_transition_matrix(const HsmmParams& params) {
  ad::Tape tape;
  HsmmVars v = bind(tape, params, nullptr);
  return log_transitions_t(v).value().transpose();
}

Matrix transition_matrix(const HsmmParams& params) {
  return log_transition_matrix(params).unaryExpr([](double x) { return std::exp(x); });
}

Vector initial_distribution(const HsmmParams& params) {
  Vector x = params.init_logits.col(0);
  const double m = x.maxCoeff();
  Vector e = (x.array() - m).exp().matrix();
  return e / e.sum();
}

double emission_segment_logprob(const HsmmParams& params, int state,
                                std::span<const TokenId> tokens) {
  const int l = static_cast<int>(tokens.size());
  if (l < 1) throw EmptySentence("emission_segment_logprob: empty segment");
  if (l > params.dims.D) {
    throw DurationOverflow("segment length " + std::to_string(l) + " exceeds D = " +
                           std::to_string(params.dims.D));
  }
  if (state < 0 || state >= params.dims.K) throw InvalidConfig("state out of range");
  ad::Tape tape;
  HsmmVars v = bind(tape, params, nullptr);
  EmissionRunner runner(v, params.dims, tokens);
  std::vector<ad::Var> lps = runner.run(0, l);
  double total = 0.0;
  for (int j = 0; j < l; ++j) total += lps[j].value()(tokens[j], state);
  return total;
}

Vector emission_next_distribution(const HsmmParams& params, int state,
                                  std::span<const TokenId> segment_prefix) {
  const int len = static_cast<int>(segment_prefix.size()) + 1;
  if (len > params.dims.D) throw DurationOverflow("segment prefix already has D tokens");
  ad::Tape tape;
  HsmmVars v = bind(tape, params, nullptr);
  EmissionRunner runner(v, params.dims, segment_prefix);
  std::vector<ad::Var> lps = runner.run(0, len);
  return lps.back().value().col(state).array().exp().matrix();
}

namespace dp {

double log_marginal(const Tables& t, Adjoint* adj) {
  const int S = t.S, K = t.K, D = t.D;
  const double log_dur = -std::log(static_cast<double>(D));
  // beta[u][i]: log P(y_{u+1..S} | segment ending at u had state i)
  Matrix beta = Matrix::Constant(S + 1, K, kNegInf);
  Matrix beta_star = Matrix::Constant(S, K, kNegInf);
  beta.row(S).setZero();
  std::vector<double> terms;
  for (int u = S - 1; u >= 0; --u) {
    if (!t.cut_allowed[u]) continue;
    for (int j = 0; j < K; ++j) {
      terms.clear();
      for (int d = 1; d <= std::min(D, S - u); ++d) {
        if (!t.cut_allowed[u + d]) continue;
        terms.push_back(beta(u + d, j) + log_dur + t.em(u, d, j));
      }
      beta_star(u, j) = log_sum_exp(terms);
    }
    if (u == 0) break;
    for (int i = 0; i < K; ++i) {
      terms.clear();
      for (int j = 0; j < K; ++j) {
        if (j != i) terms.push_back(beta_star(u, j) + t.log_trans(i, j));
      }
      beta(u, i) = log_sum_exp(terms);
    }
  }
  terms.clear();
  for (int j = 0; j < K; ++j) terms.push_back(beta_star(0, j) + t.log_init(j));
  const double log_p = log_sum_exp(terms);
  if (std::isnan(log_p)) throw NumericalError("NHSMM marginal is NaN");
  if (log_p == kNegInf) throw InfeasibleConstraints("no segmentation has non-zero mass");
  if (!adj) return log_p;

  adj->log_trans = Matrix::Zero(K, K);
  adj->log_init = Vector::Zero(K);
  adj->emission.assign(t.emission.size(), 0.0);
  Matrix a_beta = Matrix::Zero(S + 1, K);
  Matrix a_star = Matrix::Zero(S, K);
  for (int j = 0; j < K; ++j) {
    const double w = std::exp(beta_star(0, j) + t.log_init(j) - log_p);
    a_star(0, j) += w;
    adj->log_init(j) += w;
  }
  for (int u = 0; u < S; ++u) {
    if (!t.cut_allowed[u]) continue;
    if (u > 0) {
      for (int i = 0; i < K; ++i) {
        if (a_beta(u, i) == 0.0 || beta(u, i) == kNegInf) continue;
        for (int j = 0; j < K; ++j) {
          if (j == i) continue;
          const double w =
              a_beta(u, i) * std::exp(beta_star(u, j) + t.log_trans(i, j) - beta(u, i));
          a_star(u, j) += w;
          adj->log_trans(i, j) += w;
        }
      }
    }
    for (int j = 0; j < K; ++j) {
      if (a_star(u, j) == 0.0 || beta_star(u, j) == kNegInf) continue;
      for (int d = 1; d <= std::min(D, S - u); ++d) {
        if (!t.cut_allowed[u + d]) continue;
        const double w = a_star(u, j) *
                         std::exp(beta(u + d, j) + log_dur + t.em(u, d, j) - beta_star(u, j));
        if (u + d < S) a_beta(u + d, j) += w;
        adj->emission[(static_cast<std::size_t>(u) * D + (d - 1)) * K + j] += w;
      }
    }
  }
  return log_p;
}

Segmentation best_path(const Tables& t) {
  const int S = t.S, K = t.K, D = t.D;
  const double log_dur = -std::log(static_cast<double>(D));
  // best[u][i]: best log score of y_{u+1..S} given the previous segment had state i
  // and ended at u. best_star[u][j]: best score of y_{u+1..S} with a segment
  // of state j starting at u.
  Matrix best = Matrix::Constant(S + 1, K, kNegInf);
  Matrix best_star = Matrix::Constant(S, K, kNegInf);
  best.row(S).setZero();
  for (int u = S - 1; u >= 0; --u) {
    if (!t.cut_allowed[u]) continue;
    for (int j = 0; j < K; ++j) {
      double m = kNegInf;
      for (int d = 1; d <= std::min(D, S - u); ++d) {
        if (!t.cut_allowed[u + d]) continue;
        m = std::max(m, best(u + d, j) + log_dur + t.em(u, d, j));
      }
      best_star(u, j) = m;
    }
    if (u == 0) break;
    for (int i = 0; i < K; ++i) {
      double m = kNegInf;
      for (int j = 0; j < K; ++j) {
        if (j != i) m = std::max(m, best_star(u, j) + t.log_trans(i, j));
      }
      best(u, i) = m;
    }
  }
  double top = kNegInf;
  for (int j = 0; j < K; ++j) top = std::max(top, best_star(0, j) + t.log_init(j));
  if (std::isnan(top)) throw NumericalError("NHSMM Viterbi score is NaN");
  if (top == kNegInf) throw InfeasibleConstraints("no segmentation has non-zero mass");

  // Forward traceback. Among candidates within tolerance of the best, prefer
  // the longer segment, then the smaller state.
  Segmentation seg;
  seg.log_joint = top;
  int u = 0;
  int prev = -1;
  while (u < S) {
    double m = kNegInf;
    auto score = [&](int j, int d) {
      if (j == prev || !t.cut_allowed[u + d]) return kNegInf;
      const double entry = prev < 0 ? t.log_init(j) : t.log_trans(prev, j);
      return entry + log_dur + t.em(u, d, j) + best(u + d, j);
    };
    const int dmax = std::min(D, S - u);
    for (int d = 1; d <= dmax; ++d) {
      for (int j = 0; j < K; ++j) m = std::max(m, score(j, d));
    }
    const double tol = kTieTolerance * std::max(1.0, std::abs(m));
    int pick_j = -1, pick_d = -1;
    for (int d = dmax; d >= 1 && pick_j < 0; --d) {
      for (int j = 0; j < K; ++j) {
        if (score(j, d) >= m - tol) {
          pick_j = j;
          pick_d = d;
          break;
        }
      }
    }
    seg.segments.push_back({pick_j, pick_d});
    prev = pick_j;
    u += pick_d;
  }
  return seg;
}

}  // namespace dp

double backward_marginal_loglik(const HsmmParams& params, const TokenSeq& seq,
                                const ProtectedSpans& spans, const ConstraintOptions& opts) {
  validate_sequence(params, seq);
  ad::Tape tape;
  HsmmVars v = bind(tape, params, nullptr);
  TapeTables tt = build_tables(v, params.dims, seq, spans, opts);
  return dp::log_marginal(tt.tables);
}

Segmentation viterbi_segment(const HsmmParams& params, const TokenSeq& seq,
                             const ProtectedSpans& spans, const ConstraintOptions& opts) {
  validate_sequence(params, seq);
  ad::Tape tape;
  HsmmVars v = bind(tape, params, nullptr);
  TapeTables tt = build_tables(v, params.dims, seq, spans, opts);
  return dp::best_path(tt.tables);
}

double segmentation_log_joint(const HsmmParams& params, const TokenSeq& seq,
                              const std::vector<SegmentEntry>& segments) {
  const Matrix log_a = log_transition_matrix(params);
  const Vector init = initial_distribution(params);
  const double log_dur = -std::log(static_cast<double>(params.dims.D));
  double total = 0.0;
  std::size_t pos = 0;
  for (std::size_t m = 0; m < segments.size(); ++m) {
    const SegmentEntry& s = segments[m];
    total += m == 0 ? std::log(init(s.state)) : log_a(segments[m - 1].state, s.state);
    total += log_dur;
    if (pos + static_cast<std::size_t>(s.duration) > seq.size()) {
      throw InvalidConfig("segmentation longer than sequence");
    }
    total += emission_segment_logprob(
        params, s.state, std::span<const TokenId>(seq).subspan(pos, s.duration));
    pos += static_cast<std::size_t>(s.duration);
  }
  if (pos != seq.size()) throw InvalidConfig("segmentation does not cover the sequence");
  return total;
}

NllGradient nll_gradient(const HsmmParams& params, std::span<const UnpairedExample> batch,
                         const ConstraintOptions& opts) {
  if (batch.empty()) throw EmptyCorpus("nll_gradient: empty batch");
  const HsmmDims& dims = params.dims;
  NllGradient out;
  out.grad = HsmmParams::zeros(dims);
  out.grad.transition_bias.setZero();
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (const UnpairedExample& ex : batch) {
    validate_sequence(params, ex.text);
    ad::Tape tape;
    HsmmVars v = bind(tape, params, &out.grad);
    TapeTables tt = build_tables(v, dims, ex.text, ex.spans, opts);
    dp::Adjoint adj;
    const double log_p = dp::log_marginal(tt.tables, &adj);
    if (!std::isfinite(log_p)) throw NumericalError("non-finite NHSMM loss");
    out.loss -= log_p * inv_n;

    // d(-log P / n) seeds into the tape outputs.
    const double s = -inv_n;
    Matrix g_trans_t = adj.log_trans.transpose() * s;
    tape.seed(tt.log_trans_t, g_trans_t);
    tape.seed(tt.log_init, Matrix(adj.log_init * s));
    const int S = tt.tables.S, K = dims.K, D = dims.D;
    for (int a = 0; a < S; ++a) {
      const auto& rows = tt.picked[a];
      for (std::size_t j = 0; j < rows.size(); ++j) {
        Matrix g = Matrix::Zero(1, K);
        for (int d = static_cast<int>(j) + 1; d <= static_cast<int>(rows.size()); ++d) {
          for (int k = 0; k < K; ++k) {
            g(0, k) += adj.emission[(static_cast<std::size_t>(a) * D + (d - 1)) * K + k];
          }
        }
        tape.seed(rows[j], g * s);
      }
    }
    tape.backward();
  }
  out.grad.transition_bias.diagonal().setZero();
  if (!std::isfinite(out.loss)) throw NumericalError("non-finite NHSMM loss");
  return out;
}

CorpusLikelihood corpus_likelihood(const HsmmParams& params,
                                   std::span<const UnpairedExample> corpus,
                                   const ConstraintOptions& opts) {
  CorpusLikelihood r;
  for (const UnpairedExample& ex : corpus) {
    r.total_nll -= backward_marginal_loglik(params, ex.text, ex.spans, opts);
    r.tokens += static_cast<long>(ex.text.size());
    ++r.sentences;
  }
  return r;
}

HsmmDims hsmm_dims(const TrainConfig& cfg, int vocab) {
  return {cfg.K, cfg.D, vocab, cfg.d1, cfg.d2, cfg.d3};
}

Split split_indices(std::size_t n, double val_fraction, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  Split s;
  std::size_t n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n)));
  if (val_fraction > 0 && n_val == 0 && n >= 2) n_val = 1;
  if (n_val >= n) n_val = 0;
  s.valid.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
  s.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  std::sort(s.valid.begin(), s.valid.end());
  if (s.valid.empty()) s.valid = s.train;  // too small to hold out
  return s;
}

HsmmParams train_nhsmm(const std::vector<UnpairedExample>& corpus, const TrainConfig& cfg,
                       int vocab) {
  Rng rng(cfg.seed);
  HsmmParams init = HsmmParams::random(hsmm_dims(cfg, vocab), rng, cfg.init_scale);
  return train_nhsmm(corpus, cfg, init);
}

HsmmParams train_nhsmm(const std::vector<UnpairedExample>& corpus, const TrainConfig& cfg,
                       const HsmmParams& init) {
  if (corpus.empty()) throw EmptyCorpus("train_nhsmm: empty corpus");
  cfg.validate();
  if (cfg.hsmm_max_epochs == 0) return init;
  const ConstraintOptions opts{cfg.demote_long_spans};
  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  Split split = split_indices(corpus.size(), cfg.val_fraction, rng);
  std::vector<UnpairedExample> valid;
  for (std::size_t i : split.valid) valid.push_back(corpus[i]);

  HsmmParams params = init;
  HsmmParams best = init;
  double best_ppl = corpus_likelihood(init, valid, opts).perplexity();
  double ref_ppl = best_ppl;  // last significant improvement
  log_event({{"phase", "hsmm"}, {"epoch", 0}, {"val_ppl", best_ppl}, {"wall_ms", wall_clock_ms()}});
  Adam adam(cfg.hsmm_lr);
  std::vector<std::size_t> order = split.train;
  int stale = 0;
  std::vector<UnpairedExample> batch;
  for (int epoch = 1; epoch <= cfg.hsmm_max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.hsmm_batch)) {
      batch.clear();
      const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(cfg.hsmm_batch));
      for (std::size_t i = b; i < e; ++i) batch.push_back(corpus[order[i]]);
      NllGradient g = nll_gradient(params, batch, opts);
      adam.step(param_pointers(params), grad_pointers(g.grad));
      epoch_loss += g.loss;
      ++n_batches;
    }
    const double ppl = corpus_likelihood(params, valid, opts).perplexity();
    log_event({{"phase", "hsmm"},
               {"epoch", epoch},
               {"step", adam.steps()},
               {"loss", epoch_loss / static_cast<double>(std::max<std::size_t>(1, n_batches))},
               {"val_ppl", ppl},
               {"wall_ms", wall_clock_ms()}});
    if (!std::isfinite(ppl)) throw NumericalError("validation perplexity is not finite");
    if (ppl < best_ppl) {
      best_ppl = ppl;
      best = params;
    }
    if (ppl < ref_ppl * (1.0 - cfg.rel_tol)) {
      ref_ppl = ppl;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  return best;
}

}  // namespace s2st
