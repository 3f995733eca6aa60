#include "redcliff/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace redcliff {

void AdamState::init(const std::vector<Tensor>& params) {
  step_count = 0;
  first_moment.clear();
  second_moment.clear();
  for (const Tensor& p : params) {
    first_moment.push_back(Eigen::ArrayXd::Zero(p.numel()));
    second_moment.push_back(Eigen::ArrayXd::Zero(p.numel()));
  }
}

void adam_step(std::vector<Tensor>& params, AdamState& state) {
  if (params.size() != state.first_moment.size())
    throw std::invalid_argument("adam_step: state not initialized for this parameter list");
  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    if (state.first_moment[i].size() != p.numel())
      throw std::invalid_argument("adam_step: moment/parameter shape mismatch");
    Eigen::ArrayXd g = p.has_grad() ? p.grad() : Eigen::ArrayXd::Zero(p.numel());
    if (state.weight_decay != 0.0) g += state.weight_decay * p.data();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.square();
    p.data() -= state.learning_rate * (m / bc1) / ((v / bc2).sqrt() + state.epsilon);
  }
}

void zero_grads(std::vector<Tensor>& params) {
  for (Tensor& p : params) p.zero_grad();
}

}  // namespace redcliff
