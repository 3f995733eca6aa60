#pragma once

#include "redcliff/rng.hpp"
#include "redcliff/tensor.hpp"

namespace redcliff {

// Scalar edge activations used by the synthetic systems. nrelu is the
// mirrored ReLU, relu(-x); this is the form under which relu(a) == nrelu(-a)
// holds identically, which the state-swap unidentifiability argument needs.
inline double relu(double x) { return x > 0.0 ? x : 0.0; }
inline double nrelu(double x) { return x < 0.0 ? -x : 0.0; }

// Elementwise graph ops (same shape unless noted).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

/// x:(N,in) * W:(out,in)^T + b:(out), row-broadcast -> (N,out).
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

/// Horizontal concatenation of 2-D tensors with equal row counts.
Tensor concat_cols(const std::vector<Tensor>& parts);

/// Columns [c0, c0+len) of a 2-D tensor.
Tensor slice_cols(const Tensor& x, Index c0, Index len);

/// out(i,j) = m(i,j) * a(i); a has shape (N) or (N,1).
Tensor rowwise_scale(const Tensor& m, const Tensor& a);

/// out(i,j) = x(i,j) * s(j) + b(j); elementwise affine per column.
Tensor colwise_affine(const Tensor& x, const Tensor& s, const Tensor& b);

// Scalar-valued reductions and penalties.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor mse(const Tensor& a, const Tensor& b);
Tensor l1_norm(const Tensor& a);

/// Flattened cosine similarity; 0 when either norm is below 1e-12.
Tensor cosine_sim(const Tensor& a, const Tensor& b);

/// v:(N) against z:(N,P,Q): sum_n v_n * z[n,:,:] -> (P,Q).
Tensor broadcast_mul(const Tensor& v, const Tensor& z);

/// Per-output-node first layers (each H x n_c*tau_in, input column j*tau_in+c
/// holding channel j at window position c, newest last) -> lagged adjacency
/// (n_c, n_c, tau_in) of hidden-unit L2 norms; slice l corresponds to lag l+1.
Tensor extract_adjacency(const std::vector<Tensor>& first_layers, Index n_c, Index tau_in);

/// (n, n, tau) -> (n, n) summed over the lag axis.
Tensor lag_sum(const Tensor& adj);

// Seeded tensor draws.
Tensor draw_uniform(Rng& rng, Shape shape);
Tensor draw_gaussian(Rng& rng, double mean, double std, Shape shape);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(double c, const Tensor& a) { return scale(a, c); }

}  // namespace redcliff
