#include "redcliff/ops.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace redcliff {

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

ConstMatMap mat(const Tensor& t) { return t.matrix(); }

// Row-major 2-D map over a node's grad buffer.
MatMap grad_mat(TensorNode& n) {
  return MatMap(n.ensure_grad().data(), n.shape[0], n.shape[1]);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  return Tensor::make_op(a.shape(), a.data() + b.data(), {a, b}, [](TensorNode& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->ensure_grad() += n.grad;
    if (n.parents[1]->requires_grad) n.parents[1]->ensure_grad() += n.grad;
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  return Tensor::make_op(a.shape(), a.data() - b.data(), {a, b}, [](TensorNode& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->ensure_grad() += n.grad;
    if (n.parents[1]->requires_grad) n.parents[1]->ensure_grad() -= n.grad;
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  return Tensor::make_op(a.shape(), a.data() * b.data(), {a, b}, [](TensorNode& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->ensure_grad() += n.grad * n.parents[1]->value;
    if (n.parents[1]->requires_grad) n.parents[1]->ensure_grad() += n.grad * n.parents[0]->value;
  });
}

Tensor scale(const Tensor& a, double c) {
  return Tensor::make_op(a.shape(), c * a.data(), {a}, [c](TensorNode& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->ensure_grad() += c * n.grad;
  });
}

Tensor relu(const Tensor& x) {
  return Tensor::make_op(x.shape(), x.data().max(0.0), {x}, [](TensorNode& n) {
    if (n.parents[0]->requires_grad)
      n.parents[0]->ensure_grad() += (n.parents[0]->value > 0.0).cast<double>() * n.grad;
  });
}

Tensor sigmoid(const Tensor& x) {
  Eigen::ArrayXd s = 1.0 / (1.0 + (-x.data()).exp());
  return Tensor::make_op(x.shape(), std::move(s), {x}, [](TensorNode& n) {
    if (n.parents[0]->requires_grad)
      n.parents[0]->ensure_grad() += n.grad * n.value * (1.0 - n.value);
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.shape().size() != 2 || w.shape().size() != 2)
    throw std::invalid_argument("linear: x and w must be 2-D");
  const Index n = x.rows(), in = x.cols(), out = w.rows();
  if (w.cols() != in) throw std::invalid_argument("linear: w columns must match x columns");
  if (b.numel() != out) throw std::invalid_argument("linear: bias length must match w rows");

  Eigen::ArrayXd val(n * out);
  MatMap y(val.data(), n, out);
  y.noalias() = mat(x) * mat(w).transpose();
  y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b.data().data(), out);

  return Tensor::make_op({n, out}, std::move(val), {x, w, b}, [n, in, out](TensorNode& node) {
    ConstMatMap g(node.grad.data(), n, out);
    auto& xp = *node.parents[0];
    auto& wp = *node.parents[1];
    auto& bp = *node.parents[2];
    ConstMatMap xv(xp.value.data(), n, in);
    ConstMatMap wv(wp.value.data(), out, in);
    if (xp.requires_grad) MatMap(xp.ensure_grad().data(), n, in).noalias() += g * wv;
    if (wp.requires_grad) MatMap(wp.ensure_grad().data(), out, in).noalias() += g.transpose() * xv;
    if (bp.requires_grad)
      Eigen::Map<Eigen::RowVectorXd>(bp.ensure_grad().data(), out) += g.colwise().sum();
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const Index n = parts[0].rows();
  Index total = 0;
  for (const Tensor& p : parts) {
    if (p.rows() != n) throw std::invalid_argument("concat_cols: row count mismatch");
    total += p.cols();
  }
  Eigen::ArrayXd val(n * total);
  MatMap out(val.data(), n, total);
  Index c = 0;
  std::vector<Index> widths;
  for (const Tensor& p : parts) {
    out.middleCols(c, p.cols()) = mat(p);
    widths.push_back(p.cols());
    c += p.cols();
  }
  return Tensor::make_op({n, total}, std::move(val), parts, [n, total, widths](TensorNode& node) {
    ConstMatMap g(node.grad.data(), n, total);
    Index c = 0;
    for (std::size_t i = 0; i < node.parents.size(); ++i) {
      auto& p = *node.parents[i];
      if (p.requires_grad) grad_mat(p) += g.middleCols(c, widths[i]);
      c += widths[i];
    }
  });
}

Tensor slice_cols(const Tensor& x, Index c0, Index len) {
  const Index n = x.rows(), w = x.cols();
  if (c0 < 0 || len < 0 || c0 + len > w) throw std::invalid_argument("slice_cols: out of range");
  Eigen::ArrayXd val(n * len);
  MatMap(val.data(), n, len) = mat(x).middleCols(c0, len);
  return Tensor::make_op({n, len}, std::move(val), {x}, [n, len, c0](TensorNode& node) {
    auto& p = *node.parents[0];
    if (p.requires_grad)
      grad_mat(p).middleCols(c0, len) += ConstMatMap(node.grad.data(), n, len);
  });
}

Tensor rowwise_scale(const Tensor& m, const Tensor& a) {
  const Index n = m.rows(), c = m.cols();
  if (a.numel() != n) throw std::invalid_argument("rowwise_scale: scale length must match rows");
  Eigen::ArrayXd val(n * c);
  MatMap out(val.data(), n, c);
  out = mat(m).array().colwise() * a.data();
  return Tensor::make_op({n, c}, std::move(val), {m, a}, [n, c](TensorNode& node) {
    ConstMatMap g(node.grad.data(), n, c);
    auto& mp = *node.parents[0];
    auto& ap = *node.parents[1];
    ConstMatMap mv(mp.value.data(), n, c);
    if (mp.requires_grad) grad_mat(mp).array() += g.array().colwise() * ap.value;
    if (ap.requires_grad)
      ap.ensure_grad() += (g.array() * mv.array()).rowwise().sum();
  });
}

Tensor colwise_affine(const Tensor& x, const Tensor& s, const Tensor& b) {
  const Index n = x.rows(), c = x.cols();
  if (s.numel() != c || b.numel() != c)
    throw std::invalid_argument("colwise_affine: scale/bias length must match columns");
  Eigen::ArrayXd val(n * c);
  MatMap out(val.data(), n, c);
  out = mat(x).array().rowwise() * s.data().transpose();
  out.array().rowwise() += b.data().transpose();
  return Tensor::make_op({n, c}, std::move(val), {x, s, b}, [n, c](TensorNode& node) {
    ConstMatMap g(node.grad.data(), n, c);
    auto& xp = *node.parents[0];
    auto& sp = *node.parents[1];
    auto& bp = *node.parents[2];
    if (xp.requires_grad)
      grad_mat(xp).array() += g.array().rowwise() * sp.value.transpose();
    if (sp.requires_grad)
      sp.ensure_grad() +=
          (g.array() * ConstMatMap(xp.value.data(), n, c).array()).colwise().sum().transpose();
    if (bp.requires_grad) bp.ensure_grad() += g.array().colwise().sum().transpose();
  });
}

Tensor sum(const Tensor& x) {
  return Tensor::make_op({}, Eigen::ArrayXd::Constant(1, x.data().sum()), {x},
                         [](TensorNode& n) {
                           if (n.parents[0]->requires_grad)
                             n.parents[0]->ensure_grad() += n.grad[0];
                         });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw std::invalid_argument("mean: empty tensor");
  const double inv = 1.0 / static_cast<double>(x.numel());
  return Tensor::make_op({}, Eigen::ArrayXd::Constant(1, x.data().mean()), {x},
                         [inv](TensorNode& n) {
                           if (n.parents[0]->requires_grad)
                             n.parents[0]->ensure_grad() += inv * n.grad[0];
                         });
}

Tensor mse(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mse");
  if (a.numel() == 0) throw std::invalid_argument("mse: empty tensors");
  const double inv = 1.0 / static_cast<double>(a.numel());
  const double v = (a.data() - b.data()).square().mean();
  return Tensor::make_op({}, Eigen::ArrayXd::Constant(1, v), {a, b}, [inv](TensorNode& n) {
    Eigen::ArrayXd d = (2.0 * inv * n.grad[0]) * (n.parents[0]->value - n.parents[1]->value);
    if (n.parents[0]->requires_grad) n.parents[0]->ensure_grad() += d;
    if (n.parents[1]->requires_grad) n.parents[1]->ensure_grad() -= d;
  });
}

Tensor l1_norm(const Tensor& a) {
  return Tensor::make_op({}, Eigen::ArrayXd::Constant(1, a.data().abs().sum()), {a},
                         [](TensorNode& n) {
                           if (!n.parents[0]->requires_grad) return;
                           n.parents[0]->ensure_grad() +=
                               n.grad[0] * n.parents[0]->value.sign();
                         });
}

Tensor cosine_sim(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "cosine_sim");
  constexpr double kNormFloor = 1e-12;
  const double na = std::sqrt(a.data().square().sum());
  const double nb = std::sqrt(b.data().square().sum());
  const bool degenerate = na < kNormFloor || nb < kNormFloor;
  const double v = degenerate ? 0.0 : (a.data() * b.data()).sum() / (na * nb);
  return Tensor::make_op(
      {}, Eigen::ArrayXd::Constant(1, v), {a, b}, [na, nb, v, degenerate](TensorNode& n) {
        if (degenerate) return;
        const auto& av = n.parents[0]->value;
        const auto& bv = n.parents[1]->value;
        const double g = n.grad[0];
        if (n.parents[0]->requires_grad)
          n.parents[0]->ensure_grad() += g * (bv / (na * nb) - (v / (na * na)) * av);
        if (n.parents[1]->requires_grad)
          n.parents[1]->ensure_grad() += g * (av / (na * nb) - (v / (nb * nb)) * bv);
      });
}

Tensor broadcast_mul(const Tensor& v, const Tensor& z) {
  if (z.shape().size() != 3) throw std::invalid_argument("broadcast_mul: z must be 3-D");
  const Index nk = z.shape()[0], p = z.shape()[1], q = z.shape()[2];
  if (v.numel() != nk)
    throw std::invalid_argument("broadcast_mul: leading axis of z must equal length of v");
  const Index slice = p * q;
  Eigen::ArrayXd val = Eigen::ArrayXd::Zero(slice);
  for (Index k = 0; k < nk; ++k) val += v.data()[k] * z.data().segment(k * slice, slice);
  return Tensor::make_op({p, q}, std::move(val), {v, z}, [nk, slice](TensorNode& n) {
    auto& vp = *n.parents[0];
    auto& zp = *n.parents[1];
    for (Index k = 0; k < nk; ++k) {
      if (vp.requires_grad)
        vp.ensure_grad()[k] += (n.grad * zp.value.segment(k * slice, slice)).sum();
      if (zp.requires_grad)
        zp.ensure_grad().segment(k * slice, slice) += vp.value[k] * n.grad;
    }
  });
}

Tensor extract_adjacency(const std::vector<Tensor>& first_layers, Index n_c, Index tau_in) {
  if (static_cast<Index>(first_layers.size()) != n_c)
    throw std::invalid_argument("extract_adjacency: need one first layer per output node");
  for (const Tensor& w : first_layers)
    if (w.cols() != n_c * tau_in)
      throw std::invalid_argument("extract_adjacency: first layer has wrong input width");

  Eigen::ArrayXd val(n_c * n_c * tau_in);
  for (Index i = 0; i < n_c; ++i) {
    ConstMatMap w = first_layers[static_cast<std::size_t>(i)].matrix();
    for (Index j = 0; j < n_c; ++j)
      for (Index l = 0; l < tau_in; ++l)
        val[(i * n_c + j) * tau_in + l] = w.col(j * tau_in + (tau_in - 1 - l)).norm();
  }
  return Tensor::make_op(
      {n_c, n_c, tau_in}, std::move(val), first_layers, [n_c, tau_in](TensorNode& n) {
        for (Index i = 0; i < n_c; ++i) {
          auto& wp = *n.parents[static_cast<std::size_t>(i)];
          if (!wp.requires_grad) continue;
          const Index h = wp.shape[0];
          ConstMatMap wv(wp.value.data(), h, n_c * tau_in);
          MatMap wg(wp.ensure_grad().data(), h, n_c * tau_in);
          for (Index j = 0; j < n_c; ++j)
            for (Index l = 0; l < tau_in; ++l) {
              const Index flat = (i * n_c + j) * tau_in + l;
              const double norm = n.value[flat];
              if (norm <= 0.0) continue;  // subgradient 0 at the zero group
              const Index col = j * tau_in + (tau_in - 1 - l);
              wg.col(col) += (n.grad[flat] / norm) * wv.col(col);
            }
        }
      });
}

Tensor lag_sum(const Tensor& adj) {
  if (adj.shape().size() != 3) throw std::invalid_argument("lag_sum: tensor must be 3-D");
  const Index n0 = adj.shape()[0], n1 = adj.shape()[1], tau = adj.shape()[2];
  Eigen::ArrayXd val(n0 * n1);
  for (Index e = 0; e < n0 * n1; ++e) val[e] = adj.data().segment(e * tau, tau).sum();
  return Tensor::make_op({n0, n1}, std::move(val), {adj}, [n0, n1, tau](TensorNode& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (Index e = 0; e < n0 * n1; ++e) g.segment(e * tau, tau) += n.grad[e];
  });
}

Tensor draw_uniform(Rng& rng, Shape shape) {
  const Index n = shape_numel(shape);
  Eigen::ArrayXd v(n);
  for (Index i = 0; i < n; ++i) v[i] = rng.uniform();
  return Tensor::from_flat(std::move(shape), std::move(v));
}

Tensor draw_gaussian(Rng& rng, double mean, double std, Shape shape) {
  if (std < 0.0) throw std::invalid_argument("draw_gaussian: negative std");
  const Index n = shape_numel(shape);
  Eigen::ArrayXd v(n);
  for (Index i = 0; i < n; ++i) v[i] = rng.gaussian(mean, std);
  return Tensor::from_flat(std::move(shape), std::move(v));
}

}  // namespace redcliff
