#include "mgmn/tensor.hpp"

#include <string>
#include <unordered_set>

namespace mgmn {
namespace {

thread_local bool g_grad_enabled = true;

std::string shape_str(const Tensor& t) {
  return "[" + std::to_string(t.rows()) + "x" + std::to_string(t.cols()) + "]";
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                         shape_str(b));
  }
}

bool needs_grad(std::initializer_list<const Tensor*> parents) {
  if (!g_grad_enabled) return false;
  for (const Tensor* p : parents) {
    if (p->requires_grad()) return true;
  }
  return false;
}

Tensor make_result(Matrix value, const char* op, std::initializer_list<const Tensor*> parents,
                   std::function<void(Node&)> rule) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = op;
  if (needs_grad(parents)) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (const Tensor* p : parents) node->parents.push_back(p->node());
    node->backward = std::move(rule);
  }
  return Tensor(std::move(node));
}

Node& parent(Node& n, std::size_t i) { return *n.parents[i]; }

// Row norms floored at eps, plus a mask of rows whose true norm exceeds eps.
struct GuardedNorms {
  Eigen::VectorXd norm;    // max(|row|, eps)
  Eigen::VectorXd active;  // 1 if |row| > eps else 0
};

GuardedNorms guarded_row_norms(const Matrix& m) {
  GuardedNorms out;
  const Eigen::VectorXd raw = m.rowwise().norm();
  out.norm = raw.cwiseMax(kNormEpsilon);
  out.active = (raw.array() > kNormEpsilon).cast<double>();
  return out;
}

}  // namespace

Tensor::Tensor(Matrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Index rows, Index cols, bool requires_grad) {
  return Tensor(Matrix::Zero(rows, cols), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return Tensor(Matrix::Constant(1, 1, v), requires_grad);
}

Tensor Tensor::row(std::initializer_list<double> values, bool requires_grad) {
  Matrix m(1, static_cast<Index>(values.size()));
  Index i = 0;
  for (double v : values) m(0, i++) = v;
  return Tensor(std::move(m), requires_grad);
}

double Tensor::item() const {
  if (!is_scalar()) throw ContractError("item(): tensor is not a scalar " + shape_str(*this));
  return node_->value(0, 0);
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tape::Tape(const Tensor& root) : root_(root) {
  if (!root.defined() || !root.requires_grad()) return;
  // Iterative post-order DFS; a node is emitted after all of its parents.
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order_.push_back(node);
      stack.pop_back();
    }
  }
}

void Tape::backward() {
  if (order_.empty()) return;
  Node* root = order_.back();
  root->accumulate(Matrix::Ones(root->value.rows(), root->value.cols()));
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() != 0) n->backward(*n);
  }
}

void backward(const Tensor& loss) {
  if (!loss.defined() || !loss.is_scalar()) {
    throw ContractError("backward(): loss must be a scalar tensor");
  }
  Tape(loss).backward();
}

// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions differ " + shape_str(a) + " * " + shape_str(b));
  }
  return make_result(a.value() * b.value(), "matmul", {&a, &b}, [](Node& n) {
    Node& pa = parent(n, 0);
    Node& pb = parent(n, 1);
    if (pa.requires_grad) pa.accumulate(n.grad * pb.value.transpose());
    if (pb.requires_grad) pb.accumulate(pa.value.transpose() * n.grad);
  });
}

Tensor transpose(const Tensor& x) {
  return make_result(x.value().transpose(), "transpose", {&x},
                     [](Node& n) { parent(n, 0).accumulate(n.grad.transpose()); });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  return make_result(a.value() + b.value(), "add", {&a, &b}, [](Node& n) {
    if (parent(n, 0).requires_grad) parent(n, 0).accumulate(n.grad);
    if (parent(n, 1).requires_grad) parent(n, 1).accumulate(n.grad);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  return make_result(a.value() - b.value(), "sub", {&a, &b}, [](Node& n) {
    if (parent(n, 0).requires_grad) parent(n, 0).accumulate(n.grad);
    if (parent(n, 1).requires_grad) parent(n, 1).accumulate(-n.grad);
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  return make_result(a.value().cwiseProduct(b.value()), "mul", {&a, &b}, [](Node& n) {
    Node& pa = parent(n, 0);
    Node& pb = parent(n, 1);
    if (pa.requires_grad) pa.accumulate(n.grad.cwiseProduct(pb.value));
    if (pb.requires_grad) pb.accumulate(n.grad.cwiseProduct(pa.value));
  });
}

Tensor scale(const Tensor& x, double factor) {
  return make_result(x.value() * factor, "scale", {&x},
                     [factor](Node& n) { parent(n, 0).accumulate(n.grad * factor); });
}

Tensor add_rowwise(const Tensor& x, const Tensor& b) {
  if (b.rows() != 1 || b.cols() != x.cols()) {
    throw DimensionError("add_rowwise: bias " + shape_str(b) + " does not fit " + shape_str(x));
  }
  Matrix out = x.value().rowwise() + b.value().row(0);
  return make_result(std::move(out), "add_rowwise", {&x, &b}, [](Node& n) {
    if (parent(n, 0).requires_grad) parent(n, 0).accumulate(n.grad);
    if (parent(n, 1).requires_grad) parent(n, 1).accumulate(n.grad.colwise().sum());
  });
}

Tensor relu(const Tensor& x) {
  return make_result(x.value().cwiseMax(0.0), "relu", {&x}, [](Node& n) {
    Node& p = parent(n, 0);
    p.accumulate(n.grad.cwiseProduct((p.value.array() > 0.0).cast<double>().matrix()));
  });
}

Tensor sigmoid(const Tensor& x) {
  Matrix y = (1.0 + (-x.value().array()).exp()).inverse().matrix();
  return make_result(std::move(y), "sigmoid", {&x}, [](Node& n) {
    const auto y = n.value.array();
    parent(n, 0).accumulate((n.grad.array() * y * (1.0 - y)).matrix());
  });
}

Tensor tanh(const Tensor& x) {
  return make_result(x.value().array().tanh().matrix(), "tanh", {&x}, [](Node& n) {
    const auto y = n.value.array();
    parent(n, 0).accumulate((n.grad.array() * (1.0 - y.square())).matrix());
  });
}

Tensor sum(const Tensor& x) {
  return make_result(Matrix::Constant(1, 1, x.value().sum()), "sum", {&x}, [](Node& n) {
    Node& p = parent(n, 0);
    p.accumulate(Matrix::Constant(p.value.rows(), p.value.cols(), n.grad(0, 0)));
  });
}

Tensor mean(const Tensor& x) {
  if (x.size() == 0) throw DimensionError("mean: empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  Matrix mask(x.rows(), x.cols());
  for (Index j = 0; j < mask.cols(); ++j) {
    for (Index i = 0; i < mask.rows(); ++i) {
      mask(i, j) = uniform01(rng) < rate ? 0.0 : keep_scale;
    }
  }
  Matrix out = x.value().cwiseProduct(mask);
  return make_result(std::move(out), "dropout", {&x}, [mask = std::move(mask)](Node& n) {
    parent(n, 0).accumulate(n.grad.cwiseProduct(mask));
  });
}

Tensor cosine(const Tensor& a, const Tensor& b) {
  require_same_shape("cosine", a, b);
  const double raw_a = a.value().norm();
  const double raw_b = b.value().norm();
  const double na = std::max(raw_a, kNormEpsilon);
  const double nb = std::max(raw_b, kNormEpsilon);
  const double c = a.value().cwiseProduct(b.value()).sum() / (na * nb);
  const bool active = raw_a > kNormEpsilon && raw_b > kNormEpsilon;
  return make_result(Matrix::Constant(1, 1, c), "cosine", {&a, &b},
                     [na, nb, c, active](Node& n) {
                       if (!active) return;
                       Node& pa = parent(n, 0);
                       Node& pb = parent(n, 1);
                       const double g = n.grad(0, 0);
                       if (pa.requires_grad) {
                         pa.accumulate(g * (pb.value / (na * nb) - c * pa.value / (na * na)));
                       }
                       if (pb.requires_grad) {
                         pb.accumulate(g * (pa.value / (na * nb) - c * pb.value / (nb * nb)));
                       }
                     });
}

Tensor cosine_matrix(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("cosine_matrix: widths differ " + shape_str(a) + " vs " + shape_str(b));
  }
  GuardedNorms na = guarded_row_norms(a.value());
  GuardedNorms nb = guarded_row_norms(b.value());
  Matrix an = na.norm.cwiseInverse().asDiagonal() * a.value();
  Matrix bn = nb.norm.cwiseInverse().asDiagonal() * b.value();
  Matrix out = an * bn.transpose();
  return make_result(
      std::move(out), "cosine_matrix", {&a, &b},
      [na = std::move(na), nb = std::move(nb), an = std::move(an), bn = std::move(bn)](Node& n) {
        // Rows under the eps floor pass no gradient in either direction.
        const Matrix g = na.active.asDiagonal() * n.grad * nb.active.asDiagonal();
        Node& pa = parent(n, 0);
        Node& pb = parent(n, 1);
        if (pa.requires_grad) {
          Matrix d_an = g * bn;
          Eigen::VectorXd proj = d_an.cwiseProduct(an).rowwise().sum();
          d_an -= proj.asDiagonal() * an;
          pa.accumulate(na.norm.cwiseInverse().asDiagonal() * d_an);
        }
        if (pb.requires_grad) {
          Matrix d_bn = g.transpose() * an;
          Eigen::VectorXd proj = d_bn.cwiseProduct(bn).rowwise().sum();
          d_bn -= proj.asDiagonal() * bn;
          pb.accumulate(nb.norm.cwiseInverse().asDiagonal() * d_bn);
        }
      });
}

Tensor multi_perspective(const Tensor& x1, const Tensor& x2, const Tensor& w) {
  require_same_shape("multi_perspective", x1, x2);
  if (w.rows() != x1.cols()) {
    throw DimensionError("multi_perspective: weight " + shape_str(w) + " does not match width " +
                         std::to_string(x1.cols()));
  }
  // cosine(x1*w_k, x2*w_k) = sum_c x1 x2 w^2 / (sqrt(sum_c x1^2 w^2) sqrt(sum_c x2^2 w^2))
  const Matrix w2 = w.value().cwiseAbs2();
  const Matrix prod = x1.value().cwiseProduct(x2.value());
  const Matrix sq1 = x1.value().cwiseAbs2();
  const Matrix sq2 = x2.value().cwiseAbs2();
  const Matrix num = prod * w2;
  const Matrix n1 = (sq1 * w2).cwiseSqrt();
  const Matrix n2 = (sq2 * w2).cwiseSqrt();
  const Matrix den = n1.cwiseMax(kNormEpsilon).cwiseProduct(n2.cwiseMax(kNormEpsilon));
  Matrix out = num.cwiseQuotient(den);
  const Matrix active =
      ((n1.array() > kNormEpsilon) && (n2.array() > kNormEpsilon)).cast<double>().matrix();
  return make_result(
      out, "multi_perspective", {&x1, &x2, &w},
      [w2, prod, sq1, sq2, n1, n2, den, active, out](Node& n) {
        Node& p1 = parent(n, 0);
        Node& p2 = parent(n, 1);
        Node& pw = parent(n, 2);
        const Matrix g = n.grad.cwiseProduct(active);
        const Matrix d_num = g.cwiseQuotient(den);
        // d out / d(n1^2) = -out / (2 n1^2); only reached where n1 > eps.
        const Matrix d_q1 =
            (-0.5 * g.array() * out.array() / n1.array().square().max(kNormEpsilon * kNormEpsilon)).matrix();
        const Matrix d_q2 =
            (-0.5 * g.array() * out.array() / n2.array().square().max(kNormEpsilon * kNormEpsilon)).matrix();
        const Matrix d_prod = d_num * w2.transpose();
        if (p1.requires_grad) {
          p1.accumulate(d_prod.cwiseProduct(p2.value) +
                        2.0 * (d_q1 * w2.transpose()).cwiseProduct(p1.value));
        }
        if (p2.requires_grad) {
          p2.accumulate(d_prod.cwiseProduct(p1.value) +
                        2.0 * (d_q2 * w2.transpose()).cwiseProduct(p2.value));
        }
        if (pw.requires_grad) {
          const Matrix d_w2 = prod.transpose() * d_num + sq1.transpose() * d_q1 +
                              sq2.transpose() * d_q2;
          pw.accumulate(2.0 * d_w2.cwiseProduct(pw.value));
        }
      });
}

Tensor row_normalize(const Tensor& x) {
  const Eigen::VectorXd raw = x.value().rowwise().sum();
  const Eigen::VectorXd s = raw.cwiseMax(kNormEpsilon);
  Matrix out = s.cwiseInverse().asDiagonal() * x.value();
  const Eigen::VectorXd active = (raw.array() > kNormEpsilon).cast<double>();
  return make_result(out, "row_normalize", {&x}, [s, active, out](Node& n) {
    // y = x / s(x) with s = row sum: dx = (g - (g . y)) / s where s is live.
    const Eigen::VectorXd gy = n.grad.cwiseProduct(out).rowwise().sum();
    Matrix dx = n.grad;
    dx.colwise() -= gy.cwiseProduct(active);
    parent(n, 0).accumulate(s.cwiseInverse().asDiagonal() * dx);
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no operands");
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (const Tensor& p : parts) {
    if (p.rows() != rows) throw DimensionError("concat_cols: row counts differ");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Index offset = 0;
  bool any_grad = false;
  for (const Tensor& p : parts) {
    out.middleCols(offset, p.cols()) = p.value();
    offset += p.cols();
    any_grad = any_grad || p.requires_grad();
  }
  auto node = std::make_shared<Node>();
  node->value = std::move(out);
  node->op = "concat_cols";
  if (grad_enabled() && any_grad) {
    node->requires_grad = true;
    for (const Tensor& p : parts) node->parents.push_back(p.node());
    node->backward = [](Node& n) {
      Index off = 0;
      for (auto& p : n.parents) {
        const Index c = p->value.cols();
        if (p->requires_grad) p->accumulate(n.grad.middleCols(off, c));
        off += c;
      }
    };
  }
  return Tensor(std::move(node));
}

Tensor concat_cols(std::initializer_list<Tensor> parts) {
  return concat_cols(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor slice_cols(const Tensor& x, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > x.cols()) {
    throw DimensionError("slice_cols: range out of bounds for " + shape_str(x));
  }
  return make_result(x.value().middleCols(start, count), "slice_cols", {&x},
                     [start, count](Node& n) {
                       Node& p = parent(n, 0);
                       Matrix g = Matrix::Zero(p.value.rows(), p.value.cols());
                       g.middleCols(start, count) = n.grad;
                       p.accumulate(g);
                     });
}

Tensor row(const Tensor& x, Index i) {
  if (i < 0 || i >= x.rows()) throw DimensionError("row: index out of range for " + shape_str(x));
  return make_result(x.value().row(i), "row", {&x}, [i](Node& n) {
    Node& p = parent(n, 0);
    if (p.grad.size() == 0) p.grad = Matrix::Zero(p.value.rows(), p.value.cols());
    p.grad.row(i) += n.grad.row(0);
  });
}

Tensor gather_rows(const Tensor& x, std::span<const int> indices) {
  Matrix out(static_cast<Index>(indices.size()), x.cols());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] < 0 || indices[r] >= x.rows()) {
      throw DimensionError("gather_rows: index out of range for " + shape_str(x));
    }
    out.row(static_cast<Index>(r)) = x.value().row(indices[r]);
  }
  std::vector<int> idx(indices.begin(), indices.end());
  return make_result(std::move(out), "gather_rows", {&x}, [idx = std::move(idx)](Node& n) {
    Node& p = parent(n, 0);
    if (p.grad.size() == 0) p.grad = Matrix::Zero(p.value.rows(), p.value.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) p.grad.row(idx[r]) += n.grad.row(static_cast<Index>(r));
  });
}

Tensor colwise_max(const Tensor& x) {
  if (x.rows() == 0) throw DimensionError("colwise_max: no rows");
  Matrix out(1, x.cols());
  std::vector<Index> arg(static_cast<std::size_t>(x.cols()));
  for (Index j = 0; j < x.cols(); ++j) {
    Index best = 0;
    for (Index i = 1; i < x.rows(); ++i) {
      if (x.value()(i, j) > x.value()(best, j)) best = i;
    }
    arg[static_cast<std::size_t>(j)] = best;
    out(0, j) = x.value()(best, j);
  }
  return make_result(std::move(out), "colwise_max", {&x}, [arg = std::move(arg)](Node& n) {
    Node& p = parent(n, 0);
    if (p.grad.size() == 0) p.grad = Matrix::Zero(p.value.rows(), p.value.cols());
    for (std::size_t j = 0; j < arg.size(); ++j) {
      p.grad(arg[j], static_cast<Index>(j)) += n.grad(0, static_cast<Index>(j));
    }
  });
}

}  // namespace mgmn
