#pragma once

#include <string>
#include <vector>

#include "mgmn/model.hpp"
#include "support/gradient_check.hpp"
#include "support/random_graphs.hpp"

namespace mgmn::testing {

struct OpCase {
  std::string name;
  std::vector<Matrix> inputs;
  Op op;
};

/// Every differentiable op on fresh inputs in [-2, 2].
inline std::vector<OpCase> op_cases(Rng& rng) {
  auto m = [&](Index r, Index c) { return random_matrix(r, c, rng); };
  static const std::vector<int> order = {2, 0, 1, 0};
  return {
      {"matmul", {m(3, 4), m(4, 2)}, [](auto& x) { return matmul(x[0], x[1]); }},
      {"transpose", {m(3, 2)}, [](auto& x) { return transpose(x[0]); }},
      {"add", {m(2, 3), m(2, 3)}, [](auto& x) { return add(x[0], x[1]); }},
      {"sub", {m(2, 3), m(2, 3)}, [](auto& x) { return sub(x[0], x[1]); }},
      {"mul", {m(2, 3), m(2, 3)}, [](auto& x) { return mul(x[0], x[1]); }},
      {"scale", {m(2, 3)}, [](auto& x) { return scale(x[0], -1.7); }},
      {"add_rowwise", {m(3, 4), m(1, 4)}, [](auto& x) { return add_rowwise(x[0], x[1]); }},
      {"relu", {m(3, 3)}, [](auto& x) { return relu(x[0]); }},
      {"sigmoid", {m(3, 3)}, [](auto& x) { return sigmoid(x[0]); }},
      {"tanh", {m(3, 3)}, [](auto& x) { return tanh(x[0]); }},
      {"sum", {m(3, 2)}, [](auto& x) { return sum(x[0]); }},
      {"mean", {m(3, 2)}, [](auto& x) { return mean(x[0]); }},
      {"cosine", {m(1, 5), m(1, 5)}, [](auto& x) { return cosine(x[0], x[1]); }},
      {"cosine_matrix", {m(3, 4), m(5, 4)}, [](auto& x) { return cosine_matrix(x[0], x[1]); }},
      {"multi_perspective", {m(3, 4), m(3, 4), m(4, 6)},
       [](auto& x) { return multi_perspective(x[0], x[1], x[2]); }},
      {"row_normalize", {random_matrix(3, 4, rng, 0.5, 2.0)}, [](auto& x) { return row_normalize(x[0]); }},
      {"concat_cols", {m(2, 3), m(2, 1)}, [](auto& x) { return concat_cols({x[0], x[1]}); }},
      {"slice_cols", {m(2, 5)}, [](auto& x) { return slice_cols(x[0], 1, 3); }},
      {"row", {m(3, 4)}, [](auto& x) { return row(x[0], 1); }},
      {"gather_rows", {m(3, 4)}, [](auto& x) { return gather_rows(x[0], order); }},
      {"colwise_max", {m(4, 3)}, [](auto& x) { return colwise_max(x[0]); }},
      {"dropout_fixed_mask",
       {m(3, 4)},
       [](auto& x) {
         Rng mask(99);
         return dropout(x[0], 0.3, true, mask);
       }},
  };
}

/// Small model used by the full-model gradient checks.
inline ModelConfig gradient_check_config(Mode mode, Task task, Aggregator sgnn = Aggregator::bilstm) {
  ModelConfig c;
  c.input_dim = 3;
  c.gcn_layers = 2;
  c.gcn_dim = 4;
  c.perspectives = 3;
  c.mode = mode;
  c.task = task;
  c.sgnn_aggregator = sgnn;
  return c;
}

struct ParamGradientError {
  std::string name;
  double error;
};

/// Central differences of the pair loss with respect to every parameter.
/// Dropout masks are fixed by reseeding the generator for every evaluation.
inline std::vector<ParamGradientError> model_gradient_errors(const ModelConfig& config, std::uint64_t seed,
                                                             bool training) {
  Rng graph_rng(seed);
  const Graph a = random_feature_graph(graph_rng, 4, config.input_dim, 0.5, "a");
  const Graph b = random_feature_graph(graph_rng, 4, config.input_dim, 0.5, "b");
  const PreparedGraph pa = prepare(a);
  const PreparedGraph pb = prepare(b);
  Model m(config, seed + 100);
  const double target = config.task == Task::regression ? uniform(graph_rng, 0.05, 1.0) : 1.0;
  auto loss = [&]() {
    Rng rng(seed + 200);
    const std::vector<Tensor> y = {forward_pair(pa, pb, m, training, rng)};
    const std::vector<double> t = {target};
    return loss_mse(y, t);
  };
  m.params().zero_grad();
  backward(loss());
  std::vector<ParamGradientError> out;
  for (const auto& [name, t] : m.params().entries()) {
    Tensor handle = t;
    const Matrix analytic = handle.has_grad() ? handle.grad() : Matrix::Zero(handle.rows(), handle.cols());
    const Matrix numeric = numeric_gradient([&] { return loss().item(); }, handle.mutable_value());
    out.push_back({name, max_relative_error(analytic, numeric)});
  }
  return out;
}

}  // namespace mgmn::testing
