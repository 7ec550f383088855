#include "mgmn/adam.hpp"

#include <cmath>
#include <string>

namespace mgmn {

void adam_step(std::span<Tensor> params, AdamState& state) {
  if (state.first_moment.empty()) {
    for (const Tensor& p : params) {
      state.first_moment.push_back(Matrix::Zero(p.rows(), p.cols()));
      state.second_moment.push_back(Matrix::Zero(p.rows(), p.cols()));
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ContractError("adam_step: parameter count changed between steps");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad()) {
      throw ContractError("adam_step: parameter " + std::to_string(i) + " has no gradient");
    }
    if (state.first_moment[i].rows() != params[i].rows() ||
        state.first_moment[i].cols() != params[i].cols()) {
      throw ContractError("adam_step: moment shape does not match parameter " + std::to_string(i));
    }
  }

  const AdamOptions& o = state.options;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(o.beta1, t);
  const double correction2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& g = params[i].grad();
    Matrix& m = state.first_moment[i];
    Matrix& v = state.second_moment[i];
    m = o.beta1 * m + (1.0 - o.beta1) * g;
    v = o.beta2 * v + (1.0 - o.beta2) * g.cwiseAbs2();
    params[i].mutable_value().array() -=
        o.learning_rate * (m.array() / correction1) /
        ((v.array() / correction2).sqrt() + o.epsilon);
    params[i].zero_grad();
  }
}

double clip_grad_norm(std::span<Tensor> params, double max_norm) {
  double total = 0.0;
  for (const Tensor& p : params) {
    if (p.has_grad()) total += p.grad().squaredNorm();
  }
  total = std::sqrt(total);
  if (total > max_norm && total > 0.0) {
    const double factor = max_norm / total;
    for (Tensor& p : params) {
      if (p.has_grad()) p.mutable_grad() *= factor;
    }
  }
  return total;
}

}  // namespace mgmn
