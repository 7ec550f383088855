#pragma once

// Dense 2-D tensors over Eigen with reverse-mode automatic differentiation.
//
// Every tensor is a matrix; vectors are 1 x n rows and scalars are 1 x 1.
// Operations build a dynamic graph of Nodes as they execute; `backward`
// linearises that graph into a Tape and walks it in reverse.

#include <Eigen/Dense>

#include <array>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <vector>

#include "mgmn/errors.hpp"
#include "mgmn/rng.hpp"

namespace mgmn {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

/// Denominator guard used by every norm in the library.
inline constexpr double kNormEpsilon = 1e-8;

struct Node {
  Matrix value;
  Matrix grad;  // empty until a gradient reaches this node
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  // Pushes this->grad into the parents' grad slots.
  std::function<void(Node&)> backward;

  template <typename Derived>
  void accumulate(const Eigen::MatrixBase<Derived>& g) {
    if (grad.size() == 0) {
      grad = g;
    } else {
      grad += g;
    }
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Matrix value, bool requires_grad = false);
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor zeros(Index rows, Index cols, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor row(std::initializer_list<double> values, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  Matrix& mutable_grad() { return node_->grad; }
  bool has_grad() const { return node_->grad.size() != 0; }
  void zero_grad() { node_->grad.resize(0, 0); }
  bool requires_grad() const { return node_->requires_grad; }

  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  Index size() const { return node_->value.size(); }
  std::array<Index, 2> shape() const { return {rows(), cols()}; }
  bool is_scalar() const { return rows() == 1 && cols() == 1; }
  double item() const;

  const std::shared_ptr<Node>& node() const { return node_; }
  /// Stable identity of the underlying storage.
  const void* id() const { return node_.get(); }

 private:
  std::shared_ptr<Node> node_;
};

/// Whether operations currently record backward edges (thread-local).
bool grad_enabled();

/// Disables graph recording for its lifetime, e.g. during evaluation.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Topologically ordered view of the graph reachable from a root.
class Tape {
 public:
  explicit Tape(const Tensor& root);

  /// Parents precede children; each node appears once.
  std::span<Node* const> nodes() const { return order_; }

  /// Seeds d(root)/d(root) = 1 and runs every recorded backward rule in
  /// reverse order.
  void backward();

 private:
  Tensor root_;
  std::vector<Node*> order_;
};

/// Populates grad for every requires_grad tensor reachable from `loss`.
/// Gradients add to whatever the leaves already hold.
void backward(const Tensor& loss);

// ---------------------------------------------------------------------------
// Operations

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
/// x (n x k) plus the row vector b (1 x k) on every row.
Tensor add_rowwise(const Tensor& x, const Tensor& b);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// Inverted dropout. Identity when `training` is false or rate == 0.
Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng);

/// a.b / (max(|a|, eps) max(|b|, eps)) over flattened operands.
/// A vector with norm below eps contributes a zero subgradient.
Tensor cosine(const Tensor& a, const Tensor& b);

/// Pairwise row cosines: out(i, j) = cosine(a.row(i), b.row(j)).
Tensor cosine_matrix(const Tensor& a, const Tensor& b);

/// Row-wise multi-perspective cosine:
/// out(i, k) = cosine(x1.row(i) * w.col(k), x2.row(i) * w.col(k)).
Tensor multi_perspective(const Tensor& x1, const Tensor& x2, const Tensor& w);

/// Divides each row by its sum (sum floored at eps).
Tensor row_normalize(const Tensor& x);

Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_cols(std::initializer_list<Tensor> parts);
Tensor slice_cols(const Tensor& x, Index start, Index count);
Tensor row(const Tensor& x, Index i);
/// out.row(r) = x.row(indices[r]).
Tensor gather_rows(const Tensor& x, std::span<const int> indices);
/// Column-wise maximum, 1 x cols. Ties route the gradient to the first row.
Tensor colwise_max(const Tensor& x);

}  // namespace mgmn
