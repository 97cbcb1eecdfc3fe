#include "s2st/autodiff.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

namespace s2st::ad {

const Matrix& Var::value() const { return tape->value(id); }

Var Tape::constant(Matrix value) {
  Node n;
  n.owned = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(const Matrix& value, Matrix* grad_sink) {
  Node n;
  n.borrowed = &value;
  n.sink = grad_sink;
  n.needs_grad = grad_sink != nullptr;
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::zeros(Eigen::Index rows, Eigen::Index cols) {
  return constant(Matrix::Zero(rows, cols));
}

const Matrix& Tape::value(int id) const {
  const Node& n = nodes_[id];
  return n.borrowed ? *n.borrowed : n.owned;
}

Matrix& Tape::grad(int id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    const Matrix& v = n.borrowed ? *n.borrowed : n.owned;
    n.grad = Matrix::Zero(v.rows(), v.cols());
    n.has_grad = true;
  }
  return n.grad;
}

Var Tape::push(Matrix value, std::initializer_list<Var> inputs,
               std::function<void(Tape&, int)> backward_fn) {
  return push(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
              std::move(backward_fn));
}

Var Tape::push(Matrix value, std::span<const Var> inputs,
               std::function<void(Tape&, int)> backward_fn) {
  Node n;
  n.owned = std::move(value);
  for (Var in : inputs) {
    if (nodes_[in.id].needs_grad) {
      n.needs_grad = true;
      break;
    }
  }
  if (n.needs_grad) n.backward_fn = std::move(backward_fn);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::seed(Var v, const Matrix& g) {
  if (!nodes_[v.id].needs_grad) return;
  grad(v.id) += g;
}

void Tape::backward(Var root, double scale) {
  Matrix g(1, 1);
  g(0, 0) = scale;
  seed(root, g);
  backward();
}

void Tape::backward() {
  if (swept_) throw std::logic_error("Tape::backward called twice");
  swept_ = true;
  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.has_grad) continue;
    if (n.backward_fn) n.backward_fn(*this, i);
    if (n.sink) *n.sink += n.grad;
  }
}

namespace {

// Accumulates into an input's gradient only when it participates.
template <class Expr>
void accumulate(Tape& t, Var in, const Expr& g) {
  if (t.needs_grad(in.id)) t.grad(in.id) += g;
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = *a.tape;
  Matrix out = a.value() * b.value();
  return t.push(std::move(out), {a, b}, [a, b](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.needs_grad(a.id)) t.grad(a.id).noalias() += g * b.value().transpose();
    if (t.needs_grad(b.id)) t.grad(b.id).noalias() += a.value().transpose() * g;
  });
}

Var transpose(Var a) {
  Tape& t = *a.tape;
  return t.push(a.value().transpose(), {a}, [a](Tape& t, int self) {
    accumulate(t, a, t.grad(self).transpose());
  });
}

Var add(Var a, Var b) {
  Tape& t = *a.tape;
  assert(a.rows() == b.rows() && a.cols() == b.cols());
  return t.push(a.value() + b.value(), {a, b}, [a, b](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    accumulate(t, a, g);
    accumulate(t, b, g);
  });
}

Var sub(Var a, Var b) {
  Tape& t = *a.tape;
  return t.push(a.value() - b.value(), {a, b}, [a, b](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    accumulate(t, a, g);
    if (t.needs_grad(b.id)) t.grad(b.id) -= g;
  });
}

Var mul(Var a, Var b) {
  Tape& t = *a.tape;
  return t.push(a.value().cwiseProduct(b.value()), {a, b},
                [a, b](Tape& t, int self) {
                  const Matrix& g = t.grad(self);
                  accumulate(t, a, g.cwiseProduct(b.value()));
                  accumulate(t, b, g.cwiseProduct(a.value()));
                });
}

Var scale(Var a, double s) {
  Tape& t = *a.tape;
  return t.push(a.value() * s, {a}, [a, s](Tape& t, int self) {
    accumulate(t, a, t.grad(self) * s);
  });
}

Var one_minus(Var a) {
  Tape& t = *a.tape;
  Matrix out = (1.0 - a.value().array()).matrix();
  return t.push(std::move(out), {a}, [a](Tape& t, int self) {
    if (t.needs_grad(a.id)) t.grad(a.id) -= t.grad(self);
  });
}

Var add_bias(Var a, Var bias) {
  Tape& t = *a.tape;
  assert(bias.cols() == 1 && bias.rows() == a.rows());
  Matrix out = a.value().colwise() + bias.value().col(0);
  return t.push(std::move(out), {a, bias}, [a, bias](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    accumulate(t, a, g);
    accumulate(t, bias, g.rowwise().sum());
  });
}

Var sigmoid(Var a) {
  Tape& t = *a.tape;
  Matrix out = a.value().unaryExpr([](double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  return t.push(std::move(out), {a}, [a](Tape& t, int self) {
    const Matrix& y = t.value(self);
    accumulate(t, a, t.grad(self).cwiseProduct(
                         (y.array() * (1.0 - y.array())).matrix()));
  });
}

Var tanh(Var a) {
  Tape& t = *a.tape;
  Matrix out = a.value().array().tanh().matrix();
  return t.push(std::move(out), {a}, [a](Tape& t, int self) {
    const Matrix& y = t.value(self);
    accumulate(t, a, t.grad(self).cwiseProduct(
                         (1.0 - y.array().square()).matrix()));
  });
}

Var relu(Var a) {
  Tape& t = *a.tape;
  Matrix out = a.value().cwiseMax(0.0);
  return t.push(std::move(out), {a}, [a](Tape& t, int self) {
    Matrix mask = (a.value().array() > 0.0).cast<double>().matrix();
    accumulate(t, a, t.grad(self).cwiseProduct(mask));
  });
}

Var log(Var a) {
  Tape& t = *a.tape;
  Matrix out = a.value().array().log().matrix();
  return t.push(std::move(out), {a}, [a](Tape& t, int self) {
    accumulate(t, a, t.grad(self).cwiseQuotient(a.value()));
  });
}

Var clamp(Var a, double lo, double hi) {
  Tape& t = *a.tape;
  Matrix out = a.value().cwiseMax(lo).cwiseMin(hi);
  return t.push(std::move(out), {a}, [a, lo, hi](Tape& t, int self) {
    Matrix mask = ((a.value().array() >= lo) && (a.value().array() <= hi))
                      .cast<double>()
                      .matrix();
    accumulate(t, a, t.grad(self).cwiseProduct(mask));
  });
}

namespace {

Matrix log_softmax_value(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double m = x.col(c).maxCoeff();
    const double lse = m + std::log((x.col(c).array() - m).exp().sum());
    out.col(c) = x.col(c).array() - lse;
  }
  return out;
}

}  // namespace

Var log_softmax_cols(Var a) {
  Tape& t = *a.tape;
  return t.push(log_softmax_value(a.value()), {a}, [a](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Matrix p = t.value(self).array().exp().matrix();
    Matrix gin = g - p * g.colwise().sum().asDiagonal();
    accumulate(t, a, gin);
  });
}

Var softmax_cols(Var a) {
  Tape& t = *a.tape;
  Matrix out = log_softmax_value(a.value()).array().exp().matrix();
  return t.push(std::move(out), {a}, [a](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    const Matrix& p = t.value(self);
    // d/dx_i = p_i (g_i - sum_j g_j p_j), per column
    Eigen::RowVectorXd dots = g.cwiseProduct(p).colwise().sum();
    Matrix gin = p.cwiseProduct(g - Matrix::Ones(g.rows(), 1) * dots);
    accumulate(t, a, gin);
  });
}

Var gather_rows(Var table, std::span<const int> ids) {
  Tape& t = *table.tape;
  const Matrix& tv = table.value();
  Matrix out(tv.cols(), static_cast<Eigen::Index>(ids.size()));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out.col(static_cast<Eigen::Index>(i)) = tv.row(ids[i]).transpose();
  }
  std::vector<int> idv(ids.begin(), ids.end());
  return t.push(std::move(out), {table},
                [table, idv = std::move(idv)](Tape& t, int self) {
                  const Matrix& g = t.grad(self);
                  Matrix& gt = t.grad(table.id);
                  for (std::size_t i = 0; i < idv.size(); ++i) {
                    gt.row(idv[i]) +=
                        g.col(static_cast<Eigen::Index>(i)).transpose();
                  }
                });
}

Var pick(Var a, std::span<const int> rows) {
  Tape& t = *a.tape;
  const Matrix& av = a.value();
  assert(static_cast<Eigen::Index>(rows.size()) == av.cols());
  Matrix out(1, av.cols());
  for (Eigen::Index c = 0; c < av.cols(); ++c) out(0, c) = av(rows[c], c);
  std::vector<int> rv(rows.begin(), rows.end());
  return t.push(std::move(out), {a}, [a, rv = std::move(rv)](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(a.id);
    for (Eigen::Index c = 0; c < g.cols(); ++c) ga(rv[c], c) += g(0, c);
  });
}

Var row(Var a, Eigen::Index r) { return block(a, r, 0, 1, a.cols()); }

Var col(Var a, Eigen::Index c) { return block(a, 0, c, a.rows(), 1); }

Var block(Var a, Eigen::Index r0, Eigen::Index c0, Eigen::Index nr,
          Eigen::Index nc) {
  Tape& t = *a.tape;
  Matrix out = a.value().block(r0, c0, nr, nc);
  return t.push(std::move(out), {a}, [a, r0, c0, nr, nc](Tape& t, int self) {
    if (t.needs_grad(a.id)) t.grad(a.id).block(r0, c0, nr, nc) += t.grad(self);
  });
}

Var vcat(Var a, Var b) {
  Tape& t = *a.tape;
  assert(a.cols() == b.cols());
  Matrix out(a.rows() + b.rows(), a.cols());
  out << a.value(), b.value();
  const Eigen::Index ra = a.rows();
  return t.push(std::move(out), {a, b}, [a, b, ra](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    accumulate(t, a, g.topRows(ra));
    accumulate(t, b, g.bottomRows(g.rows() - ra));
  });
}

Var vcat(std::span<const Var> parts) {
  assert(!parts.empty());
  Tape& t = *parts[0].tape;
  Eigen::Index rows = 0;
  for (Var p : parts) rows += p.rows();
  Matrix out(rows, parts[0].cols());
  Eigen::Index r = 0;
  for (Var p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  std::vector<Var> pv(parts.begin(), parts.end());
  return t.push(std::move(out), parts, [pv](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Eigen::Index r = 0;
    for (Var p : pv) {
      accumulate(t, p, g.middleRows(r, p.rows()));
      r += p.rows();
    }
  });
}

Var hcat(std::span<const Var> parts) {
  assert(!parts.empty());
  Tape& t = *parts[0].tape;
  Eigen::Index cols = 0;
  for (Var p : parts) cols += p.cols();
  Matrix out(parts[0].rows(), cols);
  Eigen::Index c = 0;
  for (Var p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  std::vector<Var> pv(parts.begin(), parts.end());
  return t.push(std::move(out), parts, [pv](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Eigen::Index c = 0;
    for (Var p : pv) {
      accumulate(t, p, g.middleCols(c, p.cols()));
      c += p.cols();
    }
  });
}

Var sum(Var a) {
  Tape& t = *a.tape;
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return t.push(std::move(out), {a}, [a](Tape& t, int self) {
    if (t.needs_grad(a.id)) t.grad(a.id).array() += t.grad(self)(0, 0);
  });
}

Var max_cols(Var a) {
  Tape& t = *a.tape;
  const Matrix& av = a.value();
  Matrix out(av.rows(), 1);
  std::vector<Eigen::Index> arg(static_cast<std::size_t>(av.rows()));
  for (Eigen::Index r = 0; r < av.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < av.cols(); ++c) {
      if (av(r, c) > av(r, best)) best = c;
    }
    arg[static_cast<std::size_t>(r)] = best;
    out(r, 0) = av(r, best);
  }
  return t.push(std::move(out), {a}, [a, arg = std::move(arg)](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(a.id);
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      ga(r, arg[static_cast<std::size_t>(r)]) += g(r, 0);
    }
  });
}

Var unfold(Var a, Eigen::Index w) {
  Tape& t = *a.tape;
  const Matrix& av = a.value();
  const Eigen::Index d = av.rows();
  const Eigen::Index n = av.cols() - w + 1;
  assert(n >= 1);
  Matrix out(w * d, n);
  for (Eigen::Index p = 0; p < n; ++p) {
    for (Eigen::Index k = 0; k < w; ++k) out.block(k * d, p, d, 1) = av.col(p + k);
  }
  return t.push(std::move(out), {a}, [a, w, d, n](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(a.id);
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index k = 0; k < w; ++k) ga.col(p + k) += g.block(k * d, p, d, 1);
    }
  });
}

}  // namespace s2st::ad
