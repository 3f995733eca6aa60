#pragma once

#include "redcliff/tensor.hpp"

namespace redcliff {

/// Adam with coupled L2 weight decay (decay added to the gradient).
struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
  long step_count = 0;
  std::vector<Eigen::ArrayXd> first_moment;
  std::vector<Eigen::ArrayXd> second_moment;

  void init(const std::vector<Tensor>& params);
};

/// One bias-corrected Adam update over params; missing grads count as zero
/// (weight decay still applies). Increments state.step_count.
void adam_step(std::vector<Tensor>& params, AdamState& state);

void zero_grads(std::vector<Tensor>& params);

}  // namespace redcliff
