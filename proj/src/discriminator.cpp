#include "s2st/discriminator.hpp"

#include <algorithm>
#include <cmath>

#include "s2st/error.hpp"

namespace s2st {
namespace {

using ad::Var;

constexpr double kEps = 1e-7;
constexpr int kMinLength = 3;

struct DiscVars {
  Var emb;
  std::vector<Var> msg_conv, msg_bias, resp_conv, resp_bias;
  Var hidden_w, hidden_b, out_w, out_b;
};

DiscVars bind(ad::Tape& t, const DiscriminatorParams& p, DiscriminatorParams* g) {
  DiscVars v;
  v.emb = t.leaf(p.embeddings, g ? &g->embeddings : nullptr);
  for (std::size_t i = 0; i < p.msg_conv.size(); ++i) {
    v.msg_conv.push_back(t.leaf(p.msg_conv[i], g ? &g->msg_conv[i] : nullptr));
    v.msg_bias.push_back(t.leaf(p.msg_bias[i], g ? &g->msg_bias[i] : nullptr));
    v.resp_conv.push_back(t.leaf(p.resp_conv[i], g ? &g->resp_conv[i] : nullptr));
    v.resp_bias.push_back(t.leaf(p.resp_bias[i], g ? &g->resp_bias[i] : nullptr));
  }
  v.hidden_w = t.leaf(p.hidden_weight, g ? &g->hidden_weight : nullptr);
  v.hidden_b = t.leaf(p.hidden_bias, g ? &g->hidden_bias : nullptr);
  v.out_w = t.leaf(p.out_weight, g ? &g->out_weight : nullptr);
  v.out_b = t.leaf(p.out_bias, g ? &g->out_bias : nullptr);
  return v;
}

void check_text(const DiscriminatorParams& p, const TokenSeq& s) {
  if (s.empty()) throw EmptySentence("discriminator: empty sequence");
  for (TokenId id : s) {
    if (id < 0 || id >= p.dims.V) throw InvalidConfig("discriminator: token id outside vocabulary");
  }
}

void encode_text(const DiscriminatorParams& p, const DiscVars& v, const TokenSeq& s,
                 const std::vector<Var>& conv, const std::vector<Var>& bias, std::vector<Var>& feats) {
  int max_w = kMinLength;
  for (int w : p.dims.windows) max_w = std::max(max_w, w);
  TokenSeq padded = s;
  if (static_cast<int>(padded.size()) < max_w) padded.resize(static_cast<std::size_t>(max_w), kPad);
  Var x = ad::gather_rows(v.emb, padded);
  for (std::size_t i = 0; i < conv.size(); ++i) {
    Var c = ad::relu(ad::add_bias(ad::matmul(conv[i], ad::unfold(x, p.dims.windows[i])), bias[i]));
    feats.push_back(ad::max_cols(c));
  }
}

Var logit(const DiscriminatorParams& p, const DiscVars& v, const TokenSeq& msg, const TokenSeq& resp) {
  check_text(p, msg);
  check_text(p, resp);
  std::vector<Var> feats;
  encode_text(p, v, msg, v.msg_conv, v.msg_bias, feats);
  encode_text(p, v, resp, v.resp_conv, v.resp_bias, feats);
  Var h = ad::relu(ad::add_bias(ad::matmul(v.hidden_w, ad::vcat(feats)), v.hidden_b));
  return ad::add(ad::matmul(v.out_w, h), v.out_b);
}

// Clamped log D and log (1 - D) terms of one triple.
Var triple_objective(const DiscriminatorParams& p, const DiscVars& v, const DiscTriple& tr) {
  Var d_h = ad::clamp(ad::sigmoid(logit(p, v, tr.message, tr.human)), kEps, 1 - kEps);
  Var d_g = ad::clamp(ad::sigmoid(logit(p, v, tr.message, tr.generated)), kEps, 1 - kEps);
  return ad::add(ad::log(d_h), ad::log(ad::one_minus(d_g)));
}

}  // namespace

DiscDims disc_dims(const TrainConfig& cfg, int vocab) {
  return {vocab, cfg.d3, cfg.disc_windows, cfg.disc_filters, cfg.disc_hidden};
}

DiscriminatorParams DiscriminatorParams::zeros(const DiscDims& d) {
  if (d.V < 1 || d.d3 < 1 || d.filters < 1 || d.hidden < 1 || d.windows.empty()) {
    throw InvalidConfig("discriminator dimensions must be positive");
  }
  for (int w : d.windows) {
    if (w < 1) throw InvalidConfig("discriminator window sizes must be >= 1");
  }
  DiscriminatorParams p;
  p.dims = d;
  p.embeddings = Matrix::Zero(d.V, d.d3);
  for (int w : d.windows) {
    p.msg_conv.push_back(Matrix::Zero(d.filters, w * d.d3));
    p.msg_bias.push_back(Matrix::Zero(d.filters, 1));
    p.resp_conv.push_back(Matrix::Zero(d.filters, w * d.d3));
    p.resp_bias.push_back(Matrix::Zero(d.filters, 1));
  }
  const int feat = 2 * static_cast<int>(d.windows.size()) * d.filters;
  p.hidden_weight = Matrix::Zero(d.hidden, feat);
  p.hidden_bias = Matrix::Zero(d.hidden, 1);
  p.out_weight = Matrix::Zero(1, d.hidden);
  p.out_bias = Matrix::Zero(1, 1);
  return p;
}

DiscriminatorParams DiscriminatorParams::random(const DiscDims& d, Rng& rng, double scale) {
  DiscriminatorParams p = zeros(d);
  p.visit_trainable([&](const std::string&, Matrix& m) { fill_uniform(m, rng, scale); });
  p.embeddings.row(kPad).setZero();
  return p;
}

double score(const DiscriminatorParams& params, const TokenSeq& message, const TokenSeq& response) {
  ad::Tape t;
  DiscVars v = bind(t, params, nullptr);
  return std::clamp(ad::sigmoid(logit(params, v, message, response)).scalar(), kEps, 1 - kEps);
}

double disc_loss(const DiscriminatorParams& params, std::span<const DiscTriple> batch) {
  if (batch.empty()) throw EmptyCorpus("disc_loss: empty batch");
  double loss = 0.0;
  for (const auto& tr : batch) {
    ad::Tape t;
    DiscVars v = bind(t, params, nullptr);
    loss -= triple_objective(params, v, tr).scalar();
  }
  if (!std::isfinite(loss)) throw NumericalError("non-finite discriminator loss");
  return loss;
}

DiscGradient disc_loss_gradient(const DiscriminatorParams& params, std::span<const DiscTriple> batch) {
  if (batch.empty()) throw EmptyCorpus("disc_loss: empty batch");
  DiscGradient out;
  out.grad = DiscriminatorParams::zeros(params.dims);
  for (const auto& tr : batch) {
    ad::Tape t;
    DiscVars v = bind(t, params, &out.grad);
    Var obj = triple_objective(params, v, tr);
    out.loss -= obj.scalar();
    t.backward(obj, -1.0);
  }
  if (!std::isfinite(out.loss)) throw NumericalError("non-finite discriminator loss");
  out.grad.embeddings.row(kPad).setZero();
  return out;
}

}  // namespace s2st
