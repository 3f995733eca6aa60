#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <vector>

namespace redcliff {

using Index = Eigen::Index;
using Shape = std::vector<Index>;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

Index shape_numel(const Shape& shape);

struct TensorNode {
  Shape shape;
  Eigen::ArrayXd value;  // flat, row-major
  Eigen::ArrayXd grad;   // sized lazily during backward
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backprop;  // scatters this->grad into parents

  Eigen::ArrayXd& ensure_grad();
};

/// Value-semantic handle onto a node of the recorded computation graph.
/// Operations on tensors (see ops.hpp) extend the graph; backward() walks it.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double v, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor from_flat(Shape shape, Eigen::ArrayXd data, bool requires_grad = false);
  static Tensor from_matrix(const Eigen::MatrixXd& m, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(n_); }
  const Shape& shape() const { return n_->shape; }
  Index numel() const { return n_->value.size(); }
  Index rows() const;
  Index cols() const;
  bool requires_grad() const { return n_->requires_grad; }
  Tensor& set_requires_grad(bool v) {
    n_->requires_grad = v;
    return *this;
  }

  /// Scalar tensors only.
  double item() const;

  Eigen::ArrayXd& data() { return n_->value; }
  const Eigen::ArrayXd& data() const { return n_->value; }
  Eigen::ArrayXd& grad() { return n_->ensure_grad(); }
  bool has_grad() const { return n_->grad.size() == n_->value.size(); }
  void zero_grad();

  /// Row-major 2-D view; tensor must have rank 2.
  MatMap matrix();
  ConstMatMap matrix() const;
  Eigen::MatrixXd to_matrix() const;

  /// Reverse pass from a scalar: fills grad of every reachable
  /// requires_grad ancestor with d(this)/d(ancestor).
  void backward() const;

  std::shared_ptr<TensorNode> node() const { return n_; }

  /// Graph-extending constructor used by every op. Parents that do not
  /// require gradients are dropped from the tape.
  static Tensor make_op(Shape shape, Eigen::ArrayXd value, std::vector<Tensor> parents,
                        std::function<void(TensorNode&)> backprop);

 private:
  explicit Tensor(std::shared_ptr<TensorNode> n) : n_(std::move(n)) {}
  std::shared_ptr<TensorNode> n_;
};

}  // namespace redcliff
