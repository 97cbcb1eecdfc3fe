#include "s2st/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace s2st {

GruParams GruParams::zeros(int input, int hidden) {
  GruParams p;
  for (Matrix* w : {&p.wz, &p.wr, &p.wn}) *w = Matrix::Zero(hidden, input);
  for (Matrix* u : {&p.uz, &p.ur, &p.un}) *u = Matrix::Zero(hidden, hidden);
  for (Matrix* b : {&p.bz, &p.br, &p.bn}) *b = Matrix::Zero(hidden, 1);
  return p;
}

GruVars GruVars::bind(ad::Tape& tape, const GruParams& p, GruParams* grad) {
  auto leaf = [&](const Matrix& v, Matrix* g) { return tape.leaf(v, grad ? g : nullptr); };
  GruVars out;
  out.wz = leaf(p.wz, grad ? &grad->wz : nullptr);
  out.wr = leaf(p.wr, grad ? &grad->wr : nullptr);
  out.wn = leaf(p.wn, grad ? &grad->wn : nullptr);
  out.uz = leaf(p.uz, grad ? &grad->uz : nullptr);
  out.ur = leaf(p.ur, grad ? &grad->ur : nullptr);
  out.un = leaf(p.un, grad ? &grad->un : nullptr);
  out.bz = leaf(p.bz, grad ? &grad->bz : nullptr);
  out.br = leaf(p.br, grad ? &grad->br : nullptr);
  out.bn = leaf(p.bn, grad ? &grad->bn : nullptr);
  return out;
}

GruInputs gru_project(const GruVars& g, ad::Var x) {
  return {ad::add_bias(ad::matmul(g.wz, x), g.bz),
          ad::add_bias(ad::matmul(g.wr, x), g.br),
          ad::add_bias(ad::matmul(g.wn, x), g.bn)};
}

ad::Var gru_step(const GruVars& g, ad::Var h, const GruInputs& in) {
  using namespace ad;
  Var z = sigmoid(add(in.z, matmul(g.uz, h)));
  Var r = sigmoid(add(in.r, matmul(g.ur, h)));
  Var n = tanh(add(in.n, matmul(g.un, mul(r, h))));
  return add(mul(one_minus(z), n), mul(z, h));
}

void fill_uniform(Matrix& m, Rng& rng, double scale) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = dist(rng);
  }
}

void Adam::step(const std::vector<Matrix*>& params,
                const std::vector<const Matrix*>& grads) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("Adam::step: parameter/gradient count mismatch");
  }
  if (m_.empty()) {
    for (const Matrix* p : params) {
      m_.push_back(Matrix::Zero(p->rows(), p->cols()));
      v_.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = *params[i];
    const Matrix& g = *grads[i];
    Matrix& m = m_[i];
    Matrix& v = v_[i];
    for (Eigen::Index k = 0; k < p.size(); ++k) {
      if (!std::isfinite(p.data()[k])) continue;
      const double gk = g.data()[k];
      m.data()[k] = beta1_ * m.data()[k] + (1.0 - beta1_) * gk;
      v.data()[k] = beta2_ * v.data()[k] + (1.0 - beta2_) * gk * gk;
      const double mhat = m.data()[k] / c1;
      const double vhat = v.data()[k] / c2;
      p.data()[k] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

}  // namespace s2st
