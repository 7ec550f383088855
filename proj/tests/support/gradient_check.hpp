#pragma once

#include <functional>
#include <vector>

#include "mgmn/rng.hpp"
#include "mgmn/tensor.hpp"
#include "support/finite_difference.hpp"

namespace mgmn::testing {

using Op = std::function<Tensor(const std::vector<Tensor>&)>;

inline Matrix random_matrix(Index rows, Index cols, Rng& rng, double lo = -2.0, double hi = 2.0) {
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m(i) = uniform(rng, lo, hi);
  return m;
}

/// Worst relative error between the analytic gradient of
/// sum(op(inputs) * probe) and central differences, over every input entry.
/// The random probe weights make every output entry matter differently.
inline double op_gradient_error(std::vector<Matrix> inputs, const Op& op, Rng& rng) {
  std::vector<Tensor> leaves;
  for (const auto& m : inputs) leaves.emplace_back(m, true);
  const Tensor out = op(leaves);
  const Tensor probe(random_matrix(out.rows(), out.cols(), rng));
  backward(sum(mul(out, probe)));

  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto f = [&]() {
      std::vector<Tensor> xs;
      for (const auto& m : inputs) xs.emplace_back(m);
      return sum(mul(op(xs), probe)).item();
    };
    const Matrix numeric = numeric_gradient(f, inputs[k]);
    const Matrix analytic = leaves[k].has_grad() ? leaves[k].grad() : Matrix::Zero(numeric.rows(), numeric.cols());
    worst = std::max(worst, max_relative_error(analytic, numeric));
  }
  return worst;
}

}  // namespace mgmn::testing
