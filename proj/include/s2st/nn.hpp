#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "s2st/autodiff.hpp"

namespace s2st {

using Rng = std::mt19937_64;

// Gated recurrent unit:
//   z  = sigmoid(Wz x + Uz h + bz)
//   r  = sigmoid(Wr x + Ur h + br)
//   n  = tanh(Wn x + Un (r * h) + bn)
//   h' = (1 - z) * n + z * h
struct GruParams {
  Matrix wz, wr, wn;  // hidden x input
  Matrix uz, ur, un;  // hidden x hidden
  Matrix bz, br, bn;  // hidden x 1

  static GruParams zeros(int input, int hidden);
  int input_size() const { return static_cast<int>(wz.cols()); }
  int hidden_size() const { return static_cast<int>(wz.rows()); }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + "wz", wz);
    f(prefix + "wr", wr);
    f(prefix + "wn", wn);
    f(prefix + "uz", uz);
    f(prefix + "ur", ur);
    f(prefix + "un", un);
    f(prefix + "bz", bz);
    f(prefix + "br", br);
    f(prefix + "bn", bn);
  }
};

// GRU weights placed on a tape.
struct GruVars {
  ad::Var wz, wr, wn, uz, ur, un, bz, br, bn;

  static GruVars bind(ad::Tape& tape, const GruParams& p, GruParams* grad);
};

// Input-side projections (W x + b) of the three gates, one column per batch
// element. Precomputing them lets callers reuse a shared part of the input.
struct GruInputs {
  ad::Var z, r, n;
};

GruInputs gru_project(const GruVars& g, ad::Var x);
ad::Var gru_step(const GruVars& g, ad::Var h, const GruInputs& in);
inline ad::Var gru_step(const GruVars& g, ad::Var h, ad::Var x) {
  return gru_step(g, h, gru_project(g, x));
}

void fill_uniform(Matrix& m, Rng& rng, double scale);

// Adam over a fixed list of parameter matrices. Entries whose value is
// non-finite (the disabled transitions) are left untouched.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<Matrix*>& params,
            const std::vector<const Matrix*>& grads);
  double learning_rate() const { return lr_; }
  std::int64_t steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::vector<Matrix> m_, v_;
};

// Collects pointers in visit order, for Adam and gradient checks.
template <class P>
std::vector<Matrix*> param_pointers(P& p) {
  std::vector<Matrix*> out;
  p.visit_trainable([&](const std::string&, Matrix& m) { out.push_back(&m); });
  return out;
}

template <class P>
std::vector<const Matrix*> grad_pointers(const P& g) {
  std::vector<const Matrix*> out;
  const_cast<P&>(g).visit_trainable(
      [&](const std::string&, Matrix& m) { out.push_back(&m); });
  return out;
}

// Derives an independent generator from a parent stream.
inline Rng derive_rng(Rng& parent) {
  std::seed_seq seq{parent(), parent()};
  return Rng(seq);
}

}  // namespace s2st
