#include "s2st/generator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "s2st/error.hpp"

namespace s2st {
namespace {

using ad::Var;

struct GenVars {
  GruVars enc, dec, emit;
  Var att_v_t, att_w, att_u, att_b, out_w, out_b, gates, state_emb, word_emb, bos;
};

GenVars bind(ad::Tape& t, const GeneratorParams& p, GeneratorParams* g) {
  GenVars v;
  v.enc = GruVars::bind(t, p.encoder_cell, g ? &g->encoder_cell : nullptr);
  v.dec = GruVars::bind(t, p.decoder_cell, g ? &g->decoder_cell : nullptr);
  v.emit = GruVars::bind(t, p.emission_cell, g ? &g->emission_cell : nullptr);
  v.att_v_t = ad::transpose(t.leaf(p.att_v, g ? &g->att_v : nullptr));
  v.att_w = t.leaf(p.att_w, g ? &g->att_w : nullptr);
  v.att_u = t.leaf(p.att_u, g ? &g->att_u : nullptr);
  v.att_b = t.leaf(p.att_b, g ? &g->att_b : nullptr);
  v.out_w = t.leaf(p.out_weight, g ? &g->out_weight : nullptr);
  v.out_b = t.leaf(p.out_bias, g ? &g->out_bias : nullptr);
  v.gates = t.leaf(p.gates, g ? &g->gates : nullptr);
  v.state_emb = t.leaf(p.state_embeddings, nullptr);
  v.word_emb = t.leaf(p.word_embeddings, nullptr);
  v.bos = t.leaf(p.bos_embedding, nullptr);
  return v;
}

void check_message(const GeneratorParams& p, const TokenSeq& msg) {
  if (msg.empty()) throw EmptySentence("generator: empty message");
  for (TokenId id : msg) {
    if (id < 0 || id >= p.dims.V) throw InvalidConfig("generator: token id outside vocabulary");
  }
}

void check_tpl(const GeneratorParams& p, const Template& tpl) {
  if (tpl.entries.empty()) throw InvalidConfig("generator: empty template");
  for (const auto& e : tpl.entries) {
    if (e.state < 0 || e.state >= p.dims.K) throw InvalidConfig("generator: template state outside 0..K-1");
    if (e.duration < 1) throw InvalidConfig("generator: template duration < 1");
  }
}

Var encode(const GenVars& v, ad::Tape& t, const TokenSeq& msg, int d2) {
  Var x = ad::gather_rows(v.word_emb, msg);
  Var h = t.zeros(d2, 1);
  std::vector<Var> cols;
  cols.reserve(msg.size());
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    h = gru_step(v.enc, h, ad::col(x, i));
    cols.push_back(h);
  }
  return ad::hcat(cols);
}

struct Memory {
  Var encoded;  // d2 x L
  Var keys;     // U H + b
};

Memory memory(const GenVars& v, Var encoded) {
  return {encoded, ad::add_bias(ad::matmul(v.att_u, encoded), v.att_b)};
}

struct AttVars {
  Var context, weights;
};

AttVars attend(const GenVars& v, const Memory& m, Var s) {
  using namespace ad;
  Var scores = matmul(v.att_v_t, tanh(add_bias(m.keys, matmul(v.att_w, s))));  // 1 x L
  Var alpha = softmax_cols(transpose(scores));
  return {matmul(m.encoded, alpha), alpha};
}

struct StepVars {
  Var log_probs, s, o;
};

StepVars step(const GenVars& v, const Memory& m, Var s_prev, int state,
              TokenId prev, Var o_prev) {
  using namespace ad;
  Var e_z = transpose(row(v.state_emb, state));
  Var e_prev;
  if (prev < 0) {
    e_prev = v.bos;
  } else {
    const int ids[] = {prev};
    e_prev = gather_rows(v.word_emb, ids);
  }
  Var o = gru_step(v.emit, o_prev, vcat(e_z, e_prev));
  Var gated = mul(o, transpose(row(v.gates, state)));
  Var s = gru_step(v.dec, s_prev, gated);
  AttVars a = attend(v, m, s);
  Var logits = add(matmul(v.out_w, vcat(s, a.context)), v.out_b);
  return {log_softmax_cols(logits), s, o};
}

// Walks a template one output position at a time.
class Cursor {
 public:
  explicit Cursor(const Template& tpl) : tpl_(tpl) {}
  const SegmentEntry& entry() const { return tpl_.entries[seg_]; }
  bool segment_start() const { return off_ == 0; }
  void advance() {
    if (++off_ == tpl_.entries[seg_].duration) {
      off_ = 0;
      ++seg_;
    }
  }

 private:
  const Template& tpl_;
  std::size_t seg_ = 0;
  int off_ = 0;
};

// Inference state carried between steps; values only.
struct Hidden {
  Matrix s, o;  // d2 x 1; Matrix so tape leaves can borrow them
};

// Runs one step on a scratch tape. Returns log-probabilities.
Vector infer_step(const GeneratorParams& p, const Matrix& encoded, const Matrix& keys,
                  Hidden& h, int state, bool seg_start, TokenId prev) {
  ad::Tape t;
  GenVars v = bind(t, p, nullptr);
  Memory m{t.leaf(encoded, nullptr), t.leaf(keys, nullptr)};
  Var o_prev = seg_start ? t.zeros(p.dims.d2, 1) : t.leaf(h.o, nullptr);
  StepVars out = step(v, m, t.leaf(h.s, nullptr), state, prev, o_prev);
  Vector lp = out.log_probs.value().col(0);
  h.s = out.s.value().col(0);
  h.o = out.o.value().col(0);
  return lp;
}

struct Prepared {
  Matrix encoded, keys;
};

Prepared prepare(const GeneratorParams& p, const TokenSeq& msg) {
  check_message(p, msg);
  ad::Tape t;
  GenVars v = bind(t, p, nullptr);
  Memory m = memory(v, encode(v, t, msg, p.dims.d2));
  return {m.encoded.value(), m.keys.value()};
}

}  // namespace

GeneratorParams GeneratorParams::zeros(const HsmmDims& d) {
  GeneratorParams p;
  p.dims = d;
  p.encoder_cell = GruParams::zeros(d.d3, d.d2);
  p.decoder_cell = GruParams::zeros(d.d2, d.d2);
  p.att_v = Matrix::Zero(d.d2, 1);
  p.att_w = Matrix::Zero(d.d2, d.d2);
  p.att_u = Matrix::Zero(d.d2, d.d2);
  p.att_b = Matrix::Zero(d.d2, 1);
  p.out_weight = Matrix::Zero(d.V, 2 * d.d2);
  p.out_bias = Matrix::Zero(d.V, 1);
  p.emission_cell = GruParams::zeros(d.d1 + d.d3, d.d2);
  p.gates = Matrix::Zero(d.K, d.d2);
  p.state_embeddings = Matrix::Zero(d.K, d.d1);
  p.word_embeddings = Matrix::Zero(d.V, d.d3);
  p.bos_embedding = Matrix::Zero(d.d3, 1);
  return p;
}

GeneratorParams GeneratorParams::from_hsmm(const HsmmParams& hsmm, Rng& rng, double scale) {
  GeneratorParams p = zeros(hsmm.dims);
  p.visit_trainable([&](const std::string&, Matrix& m) { fill_uniform(m, rng, scale); });
  p.emission_cell = hsmm.emission_cell;
  p.gates = hsmm.gates;
  p.state_embeddings = hsmm.state_embeddings;
  p.word_embeddings = hsmm.word_embeddings;
  p.bos_embedding = hsmm.segstart_embedding;
  return p;
}

Matrix encode_message(const GeneratorParams& params, const TokenSeq& message) {
  return prepare(params, message).encoded;
}

Attention attention_context(const GeneratorParams& params, const Vector& s, const Matrix& encoded) {
  if (encoded.cols() < 1) throw InvalidConfig("attention over an empty memory");
  ad::Tape t;
  GenVars v = bind(t, params, nullptr);
  Memory m = memory(v, t.leaf(encoded, nullptr));
  Matrix sm = s;
  AttVars a = attend(v, m, t.leaf(sm, nullptr));
  return {a.context.value().col(0), a.weights.value().col(0)};
}

TemplatePosition template_position(const Template& tpl, int t) {
  if (t >= 0) {
    int start = 0;
    for (std::size_t m = 0; m < tpl.entries.size(); ++m) {
      if (t < start + tpl.entries[m].duration) return {static_cast<int>(m), t - start};
      start += tpl.entries[m].duration;
    }
  }
  throw TemplateExhausted("output position " + std::to_string(t) + " is outside the template");
}

Vector initial_decoder_state(const Matrix& encoded) { return encoded.col(encoded.cols() - 1); }

StepOutput decode_step(const GeneratorParams& params, const Vector& s_prev,
                       const TemplatePosition& pos, const Template& tpl, TokenId prev_token,
                       const Vector& o_prev, const Matrix& encoded) {
  if (pos.segment < 0 || pos.segment >= static_cast<int>(tpl.entries.size()) || pos.offset < 0 ||
      pos.offset >= tpl.entries[static_cast<std::size_t>(pos.segment)].duration) {
    throw TemplateExhausted("decode_step: position outside the template");
  }
  check_tpl(params, tpl);
  ad::Tape t;
  GenVars v = bind(t, params, nullptr);
  Memory m = memory(v, t.leaf(encoded, nullptr));
  Hidden h{s_prev, o_prev};
  if (pos.offset == 0) h.o = Matrix::Zero(params.dims.d2, 1);
  Vector lp = infer_step(params, encoded, m.keys.value(), h,
                         tpl.entries[static_cast<std::size_t>(pos.segment)].state, pos.offset == 0,
                         prev_token);
  return {lp.array().exp().matrix(), h.s, h.o};
}

BeamResult generate_beam(const GeneratorParams& params, const TokenSeq& message,
                         const Template& tpl, int beam_width) {
  if (beam_width < 1) throw InvalidConfig("beam_width must be >= 1");
  check_tpl(params, tpl);
  const Prepared prep = prepare(params, message);
  struct Beam {
    TokenSeq tokens;
    double score;
    Hidden h;
  };
  std::vector<Beam> beams{{{}, 0.0, {initial_decoder_state(prep.encoded), Matrix::Zero(params.dims.d2, 1)}}};
  const int V = params.dims.V;
  Cursor cur(tpl);
  const int S = tpl.total_len();
  for (int t = 0; t < S; ++t) {
    // Lexicographic rank of each parent, for the equal-score tie-break.
    std::vector<int> order(beams.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return beams[a].tokens < beams[b].tokens; });
    std::vector<int> lex_rank(beams.size());
    for (std::size_t r = 0; r < order.size(); ++r) lex_rank[order[r]] = static_cast<int>(r);

    std::vector<Vector> lps;
    std::vector<Hidden> next_h;
    for (auto& b : beams) {
      Hidden h = b.h;
      const TokenId prev = b.tokens.empty() ? -1 : b.tokens.back();
      lps.push_back(infer_step(params, prep.encoded, prep.keys, h, cur.entry().state,
                               cur.segment_start(), prev));
      next_h.push_back(std::move(h));
    }
    struct Cand {
      double score;
      int parent;
      int token;
    };
    std::vector<Cand> cands;
    cands.reserve(beams.size() * static_cast<std::size_t>(V));
    for (std::size_t b = 0; b < beams.size(); ++b) {
      for (int y = 0; y < V; ++y) cands.push_back({beams[b].score + lps[b](y), static_cast<int>(b), y});
    }
    auto better = [&](const Cand& a, const Cand& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.parent != b.parent) return lex_rank[a.parent] < lex_rank[b.parent];
      return a.token < b.token;
    };
    const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(beam_width), cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(), better);
    std::vector<Beam> next;
    for (std::size_t i = 0; i < keep; ++i) {
      const Cand& c = cands[i];
      Beam nb{beams[c.parent].tokens, c.score, next_h[c.parent]};
      nb.tokens.push_back(c.token);
      next.push_back(std::move(nb));
    }
    beams = std::move(next);
    cur.advance();
  }
  return {beams.front().tokens, beams.front().score};
}

TokenSeq sample_rollout(const GeneratorParams& params, const TokenSeq& message,
                        const Template& tpl, const TokenSeq& prefix, int top_k, Rng& rng) {
  if (top_k < 1) throw InvalidConfig("top_k must be >= 1");
  check_tpl(params, tpl);
  const int S = tpl.total_len();
  if (static_cast<int>(prefix.size()) > S) throw TemplateMismatch("rollout prefix longer than template");
  if (static_cast<int>(prefix.size()) == S) return prefix;
  const Prepared prep = prepare(params, message);
  const int V = params.dims.V;
  const int k = std::min(top_k, V);
  Hidden h{initial_decoder_state(prep.encoded), Matrix::Zero(params.dims.d2, 1)};
  TokenSeq out;
  Cursor cur(tpl);
  std::vector<int> idx(static_cast<std::size_t>(V));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int t = 0; t < S; ++t) {
    const TokenId prev = out.empty() ? -1 : out.back();
    Vector lp = infer_step(params, prep.encoded, prep.keys, h, cur.entry().state, cur.segment_start(), prev);
    cur.advance();
    if (t < static_cast<int>(prefix.size())) {
      out.push_back(prefix[static_cast<std::size_t>(t)]);
      continue;
    }
    std::iota(idx.begin(), idx.end(), 0);
    std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](int a, int b) {
      return lp(a) != lp(b) ? lp(a) > lp(b) : a < b;
    });
    if (k == 1) {
      out.push_back(idx[0]);
      continue;
    }
    const double top = lp(idx[0]);
    double z = 0.0;
    for (int i = 0; i < k; ++i) z += std::exp(lp(idx[static_cast<std::size_t>(i)]) - top);
    double r = unif(rng) * z;
    int pick = idx[static_cast<std::size_t>(k - 1)];
    for (int i = 0; i < k; ++i) {
      r -= std::exp(lp(idx[static_cast<std::size_t>(i)]) - top);
      if (r < 0) {
        pick = idx[static_cast<std::size_t>(i)];
        break;
      }
    }
    out.push_back(pick);
  }
  return out;
}

std::vector<double> step_logprobs(const GeneratorParams& params, const TokenSeq& message,
                                  const Template& tpl, const TokenSeq& response) {
  check_tpl(params, tpl);
  if (static_cast<int>(response.size()) != tpl.total_len()) {
    throw TemplateMismatch("response length " + std::to_string(response.size()) +
                           " differs from template length " + std::to_string(tpl.total_len()));
  }
  const Prepared prep = prepare(params, message);
  Hidden h{initial_decoder_state(prep.encoded), Matrix::Zero(params.dims.d2, 1)};
  Cursor cur(tpl);
  std::vector<double> out;
  for (std::size_t t = 0; t < response.size(); ++t) {
    const TokenId prev = t == 0 ? -1 : response[t - 1];
    Vector lp = infer_step(params, prep.encoded, prep.keys, h, cur.entry().state, cur.segment_start(), prev);
    const TokenId y = response[t];
    if (y < 0 || y >= params.dims.V) throw InvalidConfig("response token outside vocabulary");
    out.push_back(lp(y));
    cur.advance();
  }
  return out;
}

double sequence_logprob(const GeneratorParams& params, const TokenSeq& message,
                        const Template& tpl, const TokenSeq& response) {
  double s = 0.0;
  for (double x : step_logprobs(params, message, tpl, response)) s += x;
  return s;
}

GeneratorGradient weighted_logprob_gradient(const GeneratorParams& params,
                                            std::span<const WeightedSequence> batch,
                                            double scale) {
  GeneratorGradient out;
  out.grad = GeneratorParams::zeros(params.dims);
  for (const auto& ex : batch) {
    check_tpl(params, ex.tpl);
    check_message(params, ex.message);
    if (static_cast<int>(ex.response.size()) != ex.tpl.total_len()) {
      throw TemplateMismatch("response length differs from template length");
    }
    if (ex.weights.size() != ex.response.size()) throw InvalidConfig("one weight per response token");
    ad::Tape t;
    GenVars v = bind(t, params, &out.grad);
    Var enc = encode(v, t, ex.message, params.dims.d2);
    Memory m = memory(v, enc);
    Var s = ad::col(enc, enc.cols() - 1);
    Var o = t.zeros(params.dims.d2, 1);
    Cursor cur(ex.tpl);
    Var total = t.zeros(1, 1);
    double value = 0.0;
    for (std::size_t i = 0; i < ex.response.size(); ++i) {
      if (cur.segment_start()) o = t.zeros(params.dims.d2, 1);
      const TokenId prev = i == 0 ? -1 : ex.response[i - 1];
      StepVars st = step(v, m, s, cur.entry().state, prev, o);
      s = st.s;
      o = st.o;
      const int y[] = {ex.response[i]};
      if (y[0] < 0 || y[0] >= params.dims.V) throw InvalidConfig("response token outside vocabulary");
      Var lp = ad::pick(st.log_probs, y);
      value += ex.weights[i] * lp.scalar();
      if (ex.weights[i] != 0.0) total = ad::add(total, ad::scale(lp, ex.weights[i]));
      cur.advance();
    }
    if (t.needs_grad(total.id)) t.backward(total, scale);
    out.value += scale * value;
  }
  if (!std::isfinite(out.value)) throw NumericalError("non-finite generator objective");
  return out;
}

}  // namespace s2st
