#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "redcliff/rng.hpp"
#include "redcliff/tensor.hpp"

namespace redcliff {

enum class EdgeActivation : int { linear = 0, relu = 1, nrelu = 2 };

/// One lagged VAR factor of the ground-truth system. adjacency[l](i, j) is
/// the weight from channel j at lag l+1 into channel i; activation[l] holds
/// the matching EdgeActivation tags.
struct VarFactorSpec {
  std::vector<Eigen::MatrixXd> adjacency;
  std::vector<Eigen::MatrixXi> activation;
  Eigen::VectorXd amp;        // innovations_amp_coeffs
  Eigen::VectorXd innov_mu;
  Eigen::VectorXd innov_var;
  Eigen::VectorXd base_freq;  // radians per step

  Index n_c() const { return adjacency.empty() ? 0 : adjacency[0].rows(); }
  Index tau() const { return static_cast<Index>(adjacency.size()); }

  /// sum_l |adjacency[l]|; the linearization used for the stability cap and
  /// as the lag-summed true graph during scoring.
  Eigen::MatrixXd lag_abs_sum() const;
};

struct SystemSpec {
  Index n_c = 0;
  Index n_e = 0;
  std::vector<VarFactorSpec> factors;
  double mix_noise_std = 0.1;
  Index burn_in = 50;

  Index n_k() const { return static_cast<Index>(factors.size()); }
};

/// K x T factor weights in [0, 1], piecewise linear between knots.
struct WeightTrajectory {
  Eigen::MatrixXd weights;
};

struct SystemGenParams {
  Index tau = 2;
  double innovations_amp = 1.0;
  double innovations_mu = 0.0;
  double innovations_var = 0.0;
  double mix_noise_std = 0.1;
  Index burn_in = 50;
  Index knot_spacing = 100;
  double spectral_cap = 0.95;
};

/// Table-12 style drive frequencies: pi * (i*707 + i%2) / 120000.
Eigen::VectorXd default_base_frequencies(Index n_c);

/// Random multi-factor system: self-connections at lag 1 on every diagonal,
/// n_e distinct off-diagonal edges per factor (all lags weighted, activations
/// sampled from {linear, relu, nrelu}), weights U(-1,1) rescaled so the
/// spectral radius of the lag-collapsed |weight| matrix is at most
/// spectral_cap.
SystemSpec build_system(Index n_c, Index n_e, Index n_k, Rng& rng,
                        const SystemGenParams& params = {});

/// Runs one factor from the replicated init state through burn_in steps, then
/// records T steps. Node update: sum over (j, lag) of w * act(past value),
/// plus amp_i * sin(base_freq_i * step) and amp_i * u * g innovations with
/// u ~ U(0,1), g ~ N(innov_mu_i, innov_var_i). Draw order per step: node 0 u,
/// node 0 g, node 1 u, ...
Eigen::MatrixXd simulate_factor(const VarFactorSpec& factor, Index t, Index burn_in,
                                const Eigen::VectorXd& init, Rng& rng);

WeightTrajectory make_trajectory(Index n_k, Index t, Index knot_spacing, Rng& rng);

/// sum_k w_k(t) * r_k(:, t) plus N(0, noise_std^2) per entry (drawn per time
/// step, channel-major).
Eigen::MatrixXd mix_recordings(const std::vector<Eigen::MatrixXd>& recordings,
                               const WeightTrajectory& trajectory, double noise_std, Rng& rng);

struct Recording {
  Eigen::MatrixXd x;  // n_c x T
  WeightTrajectory trajectory;
};

/// Full sampling pass per the generator recipe: per-factor init states drawn
/// U(-1,1), factor recordings, a knotted weight trajectory, then the noisy
/// mixture. Uses rng.fork streams: factor k -> fork(k), trajectory ->
/// fork(1000), mixing noise -> fork(2000).
Recording simulate_recording(const SystemSpec& spec, Index t, Rng& rng);

enum class ComplexityCategory { Low, Moderate, High };

struct ComplexityRating {
  double value;
  ComplexityCategory category;
};

std::string to_string(ComplexityCategory c);

/// (n_c^2 - n_c) / n_e; Low <= 7.0 < Moderate <= 13.0 < High. n_e must be in
/// (0, n_c^2 - n_c].
ComplexityRating complexity_rating(Index n_c, Index n_e);

/// dominant_coeff * recordings[dominant] + background_coeff * sum of others.
Eigen::MatrixXd combine_folds(const std::vector<Eigen::MatrixXd>& recordings, Index dominant_index,
                              double dominant_coeff, double background_coeff);

// JSON round-trip for the ground-truth file written next to generated data.
std::string system_to_json(const SystemSpec& spec);
SystemSpec system_from_json(const std::string& text);

}  // namespace redcliff
