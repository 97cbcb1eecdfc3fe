#pragma once

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace s2st {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace ad {

class Tape;

// Handle to a node on a Tape. Cheap to copy; only valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
};

// Reverse-mode tape over dense double matrices. Nodes are appended in
// evaluation order, so a reverse sweep is a valid topological order.
// Backward closures are only recorded for nodes that depend on a leaf with a
// gradient sink, which makes inference on the same code path cheap.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  // Borrowed leaf: `value` must outlive the tape. When `grad_sink` is
  // non-null, backward() adds this leaf's gradient into it.
  Var leaf(const Matrix& value, Matrix* grad_sink);
  // A Vector would bind to a temporary Matrix.
  Var leaf(const Vector& value, Matrix* grad_sink) = delete;
  Var zeros(Eigen::Index rows, Eigen::Index cols);

  const Matrix& value(int id) const;
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }
  // Gradient buffer of a node, allocated (zeroed) on first access.
  Matrix& grad(int id);

  // Adds `g` to the gradient of `v`; used for multi-output seeding.
  void seed(Var v, const Matrix& g);
  // Seeds a 1x1 node with `scale` and sweeps.
  void backward(Var root, double scale = 1.0);
  // Sweeps from whatever seeds have been set.
  void backward();

  std::size_t size() const { return nodes_.size(); }

  // Used by op implementations.
  Var push(Matrix value, std::initializer_list<Var> inputs,
           std::function<void(Tape&, int)> backward_fn);
  Var push(Matrix value, std::span<const Var> inputs,
           std::function<void(Tape&, int)> backward_fn);

 private:
  struct Node {
    Matrix owned;
    const Matrix* borrowed = nullptr;
    Matrix grad;
    bool has_grad = false;
    bool needs_grad = false;
    Matrix* sink = nullptr;
    std::function<void(Tape&, int)> backward_fn;
  };
  std::vector<Node> nodes_;
  bool swept_ = false;
};

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var scale(Var a, double s);
Var one_minus(Var a);
// Adds column vector `bias` (rows x 1) to every column of `a`.
Var add_bias(Var a, Var bias);
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var log(Var a);
Var clamp(Var a, double lo, double hi);
Var log_softmax_cols(Var a);
Var softmax_cols(Var a);
// Columns are rows `ids[i]` of `table` (table is n x d, result d x |ids|).
Var gather_rows(Var table, std::span<const int> ids);
// 1 x cols: element (rows[c], c) of `a`.
Var pick(Var a, std::span<const int> rows);
// 1 x cols: row `r` of `a`.
Var row(Var a, Eigen::Index r);
Var col(Var a, Eigen::Index c);
Var block(Var a, Eigen::Index r0, Eigen::Index c0, Eigen::Index nr,
          Eigen::Index nc);
Var vcat(Var a, Var b);
Var vcat(std::span<const Var> parts);
Var hcat(std::span<const Var> parts);
Var sum(Var a);
// rows x 1: max over columns of each row.
Var max_cols(Var a);
// Stacks windows of `w` consecutive columns: (w*rows) x (cols - w + 1).
Var unfold(Var a, Eigen::Index w);

}  // namespace ad
}  // namespace s2st
