#pragma once

#include <optional>
#include <string>
#include <vector>

#include "redcliff/dataset.hpp"
#include "redcliff/ops.hpp"
#include "redcliff/rng.hpp"
#include "redcliff/tensor.hpp"

namespace redcliff {

struct ModelConfig {
  Index n_c = 0;
  Index n_k = 1;
  Index B = 0;                          // supervised factors, B <= n_k
  Index tau_in = 4;
  Index tau_cl = 12;
  std::vector<Index> gen_hidden = {25};
  std::vector<Index> embed_hidden = {100};
  bool has_state = true;                // false: bare single-factor forecaster
  bool alpha_pinned = false;            // forecast combines factors with weight 1
  bool sigmoid_alpha = false;

  Index state_window() const { return tau_in + tau_cl; }
};

/// Per-node forecasting MLP whose first layer doubles as the lagged
/// Granger-adjacency estimate.
struct FactorNet {
  Index n_c = 0;
  Index tau_in = 0;
  struct NodeNet {
    Tensor first_w, first_b;
    std::vector<std::pair<Tensor, Tensor>> deeper;
    Tensor out_w, out_b;
  };
  std::vector<NodeNet> nodes;

  static FactorNet make(Index n_c, Index tau_in, const std::vector<Index>& hidden, Rng& rng);

  /// (N, n_c*tau_in) -> one-step forecasts (N, n_c).
  Tensor forward(const Tensor& x) const;

  /// Single window n_c x tau_in -> forecast vector (no gradient tape).
  Eigen::VectorXd forecast(const Eigen::MatrixXd& window) const;

  /// (n_c, n_c, tau_in) hidden-unit L2 norms of the first layers.
  Tensor adjacency() const;

  void collect_params(std::vector<Tensor>& params, std::vector<std::string>& names,
                      const std::string& prefix) const;
};

/// Trunk MLP producing raw factor scores, with elementwise invertible affine
/// heads g_alpha (scores) and g_y (labels). Head scales are kept at magnitude
/// >= 1e-3 by project_invertible().
struct StateModel {
  Index n_c = 0, tau_in = 0, tau_cl = 0, n_k = 0, B = 0;
  std::vector<std::pair<Tensor, Tensor>> trunk;  // hidden layers then final n_k layer
  Tensor alpha_scale, alpha_bias;                // (n_k)
  Tensor y_scale, y_bias;                        // (B)
  bool sigmoid_alpha = false;

  static constexpr double kScaleFloor = 1e-3;

  static StateModel make(const ModelConfig& cfg, Rng& rng);

  struct Out {
    Tensor alpha_raw;  // alpha' (N, n_k)
    Tensor alpha;      // g_alpha(alpha') (N, n_k)
    Tensor y_hat;      // g_y(alpha'[:, :B]) (N, B); undefined when B == 0
  };
  Out forward(const Tensor& x_state) const;

  Eigen::VectorXd g_alpha_inverse(const Eigen::VectorXd& alpha) const;
  Eigen::VectorXd g_y_forward(const Eigen::VectorXd& v) const;
  Eigen::VectorXd g_y_inverse(const Eigen::VectorXd& y) const;

  void project_invertible();

  void collect_params(std::vector<Tensor>& params, std::vector<std::string>& names) const;
};

struct RedcliffModel {
  ModelConfig cfg;
  std::vector<FactorNet> factors;
  std::optional<StateModel> state;

  static RedcliffModel make(const ModelConfig& cfg, Rng& rng);

  struct Forward {
    Tensor x_hat;               // (N, n_c)
    Tensor alpha;               // defined when the state model exists
    Tensor y_hat;               // defined when the state model exists and B > 0
  };
  /// x_state may be empty when no state model exists.
  Forward forward(const Tensor& x_state, const Tensor& x_fact) const;

  std::vector<Tensor> factor_params() const;
  std::vector<Tensor> state_params() const;
  std::vector<Tensor> all_params() const;
  std::vector<std::pair<std::string, Tensor>> named_params() const;

  /// Lag-summed adjacency of each factor as plain matrices (no tape).
  std::vector<Eigen::MatrixXd> adjacency_estimates() const;
};

// Flattened training views of a windowed dataset. Flattening is channel-major:
// element j*len + c holds channel j at window position c (newest last).
struct BatchData {
  Eigen::MatrixXd x_state;  // N x n_c*(tau_in+tau_cl)
  Eigen::MatrixXd x_fact;   // N x n_c*tau_in
  Eigen::MatrixXd target;   // N x n_c (the step after the input window)
  Eigen::MatrixXd labels;   // N x B
  Index size() const { return x_fact.rows(); }
  BatchData rows(const std::vector<Index>& idx) const;
};

BatchData make_training_matrices(const WindowedDataset& ds, Index tau_in, Index tau_cl);

struct LossCoefficients {
  double eta = 0.0;
  double omega = 10.0;
  double rho = 0.0;
  double gamma = 0.001;
  double lambda = 100.0;
};

struct LossBreakdown {
  Tensor total;
  double lag_l1 = 0.0;       // unweighted sum_k sum_t log(t+1)*||A_t||_1
  double forecast_mse = 0.0;
  double cos_penalty = 0.0;  // unweighted pairwise cosine sum
  double alpha_l1 = 0.0;     // unweighted -1 + sum_n ||alpha_n||_1
  double label_mse = 0.0;
};

/// Factor objective: eta * lag-weighted L1 of adjacencies + omega * forecast
/// MSE + rho * pairwise CosSim of identity-subtracted lag-summed adjacencies.
Tensor loss_f(const RedcliffModel& model, const RedcliffModel::Forward& fwd, const Tensor& target,
              double eta, double omega, double rho);

/// Score sparsity: gamma * (-1 + sum over samples of ||alpha_n||_1).
Tensor loss_g(const RedcliffModel::Forward& fwd, double gamma);

/// Full objective; lambda = 0 recovers the unsupervised composite.
LossBreakdown total_loss(const RedcliffModel& model, const RedcliffModel::Forward& fwd,
                         const Tensor& target, const Tensor& labels, const LossCoefficients& c);

Eigen::VectorXd naive_state_prediction(Index b);

/// Elementwise strict threshold test y_hat[b] > c[b].
std::vector<bool> behavior_presence(const Eigen::VectorXd& y_hat, const Eigen::VectorXd& c);

}  // namespace redcliff
