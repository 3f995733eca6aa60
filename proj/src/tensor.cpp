#include "redcliff/tensor.hpp"

#include <stdexcept>
#include <unordered_set>

namespace redcliff {

Index shape_numel(const Shape& shape) {
  Index n = 1;
  for (Index d : shape) {
    if (d < 0) throw std::invalid_argument("tensor shape axis must be nonnegative");
    n *= d;
  }
  return n;
}

Eigen::ArrayXd& TensorNode::ensure_grad() {
  if (grad.size() != value.size()) grad = Eigen::ArrayXd::Zero(value.size());
  return grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return from_flat(std::move(shape), Eigen::ArrayXd(), requires_grad);
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
  const Index n = shape_numel(shape);
  return from_flat(std::move(shape), Eigen::ArrayXd::Constant(n, v), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from_flat(Shape{}, Eigen::ArrayXd::Constant(1, v), requires_grad);
}

Tensor Tensor::from_flat(Shape shape, Eigen::ArrayXd data, bool requires_grad) {
  const Index n = shape_numel(shape);
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  if (data.size() == 0) {
    node->value = Eigen::ArrayXd::Zero(n);
  } else {
    if (data.size() != n) throw std::invalid_argument("tensor data length does not match shape");
    node->value = std::move(data);
  }
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::from_matrix(const Eigen::MatrixXd& m, bool requires_grad) {
  Eigen::ArrayXd flat(m.size());
  MatMap(flat.data(), m.rows(), m.cols()) = m;
  return from_flat({m.rows(), m.cols()}, std::move(flat), requires_grad);
}

Index Tensor::rows() const {
  if (n_->shape.size() != 2) throw std::logic_error("rows(): tensor is not 2-D");
  return n_->shape[0];
}

Index Tensor::cols() const {
  if (n_->shape.size() != 2) throw std::logic_error("cols(): tensor is not 2-D");
  return n_->shape[1];
}

double Tensor::item() const {
  if (numel() != 1) throw std::logic_error("item(): tensor is not scalar");
  return n_->value[0];
}

void Tensor::zero_grad() {
  if (n_->grad.size() > 0) n_->grad.setZero();
}

MatMap Tensor::matrix() {
  if (n_->shape.size() != 2) throw std::logic_error("matrix(): tensor is not 2-D");
  return MatMap(n_->value.data(), n_->shape[0], n_->shape[1]);
}

ConstMatMap Tensor::matrix() const {
  if (n_->shape.size() != 2) throw std::logic_error("matrix(): tensor is not 2-D");
  return ConstMatMap(n_->value.data(), n_->shape[0], n_->shape[1]);
}

Eigen::MatrixXd Tensor::to_matrix() const { return matrix(); }

Tensor Tensor::make_op(Shape shape, Eigen::ArrayXd value, std::vector<Tensor> parents,
                       std::function<void(TensorNode&)> backprop) {
  auto out = from_flat(std::move(shape), std::move(value), false);
  bool needs = false;
  for (const Tensor& p : parents) needs = needs || p.requires_grad();
  if (needs) {
    out.n_->requires_grad = true;
    out.n_->backprop = std::move(backprop);
    out.n_->parents.reserve(parents.size());
    for (Tensor& p : parents) out.n_->parents.push_back(p.node());
  }
  return out;
}

void Tensor::backward() const {
  if (numel() != 1) throw std::invalid_argument("backward(): loss must be scalar");
  if (!n_->requires_grad) return;

  // Iterative post-order DFS; reverse gives a topological order.
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> seen;
  std::vector<std::pair<TensorNode*, std::size_t>> stack;
  stack.emplace_back(n_.get(), 0);
  seen.insert(n_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorNode* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  n_->ensure_grad().setConstant(1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode* node = *it;
    if (node->backprop && node->grad.size() == node->value.size()) node->backprop(*node);
  }
}

}  // namespace redcliff
