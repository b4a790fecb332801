#pragma once

#include "orl/tensor.hpp"

#include <cstdint>

namespace orl {

struct AdamState {
  NetParams first_moment;
  NetParams second_moment;
  std::int64_t step_count = 0;
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_params(const NetParams& params, double learning_rate = 3e-4);
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(NetParams& params, const NetParams& grads, AdamState& state);

}  // namespace orl
