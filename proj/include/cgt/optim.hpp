#pragma once

#include <cstdint>
#include <vector>

#include "cgt/tensor.hpp"

namespace cgt {

// Adam with bias correction. Moment buffers are laid out parallel to the
// parameter list handed to init(); the list order must stay fixed between
// steps.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step_count = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  static AdamState init(const std::vector<Tensor>& params,
                        double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);
};

// One update over all parameters, then zeroes their gradients.
void adam_step(std::vector<Tensor>& params, AdamState& state, double lr);

}  // namespace cgt
