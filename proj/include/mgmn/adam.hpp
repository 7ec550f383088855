#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mgmn/tensor.hpp"

namespace mgmn {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Per-parameter moment estimates. Moments are allocated on the first step
/// and must keep matching the parameter shapes afterwards.
struct AdamState {
  AdamOptions options;
  std::int64_t step = 0;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
};

/// One bias-corrected Adam update over `params` (same order every call),
/// followed by zeroing their gradients. Throws ContractError if a parameter
/// holds no gradient.
void adam_step(std::span<Tensor> params, AdamState& state);

/// Scales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before scaling.
double clip_grad_norm(std::span<Tensor> params, double max_norm);

}  // namespace mgmn
