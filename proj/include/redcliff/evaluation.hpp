#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "redcliff/model.hpp"
#include "redcliff/synth.hpp"

namespace redcliff {

/// One n_c x n_c nonnegative score matrix per estimated factor.
struct GraphEstimate {
  std::vector<Eigen::MatrixXd> matrices;
  std::string source;
};

/// Compresses a lagged estimate by summing over the lag axis.
Eigen::MatrixXd lag_sum_matrices(const std::vector<Eigen::MatrixXd>& slices);

/// A single-graph estimate facing n_true factors is replicated n_true times;
/// multi-graph estimates pass through. Matrices must be square.
GraphEstimate standardize(const GraphEstimate& raw, Index n_true_factors);

/// Off-diagonal entries in row-major (i, j) order, i != j.
std::vector<double> offdiag_values(const Eigen::MatrixXd& m);
std::vector<int> offdiag_binary(const Eigen::MatrixXd& m);

struct F1Result {
  double f1 = 0.0;
  double threshold = 0.0;
};

/// Best F1 over all thresholds (midpoints of sorted unique scores plus +-inf
/// sentinels, prediction positive when score > threshold); ties resolve to
/// the lowest threshold. Requires at least one positive label.
F1Result optimal_f1(const std::vector<double>& scores, const std::vector<int>& labels);

/// Mann-Whitney ROC-AUC: P(score+ > score-) + 0.5 P(equal). Requires both
/// classes present.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

/// Hamming distance over strict upper / strict lower triangles (diagonal
/// ignored) of binary matrices.
std::pair<int, int> shd_split(const Eigen::MatrixXi& pred, const Eigen::MatrixXi& truth);

/// Pairing of estimated to true factors: the first B pair by label index,
/// remaining estimates greedily by best optimal F1 with each truth used once.
/// Returns, per estimated factor, the matched truth index (-1 if unmatched).
std::vector<Index> match_factors(const GraphEstimate& est, const GraphEstimate& truth, Index b);

struct MeanSem {
  double mean = 0.0;
  double sem = 0.0;
};

MeanSem mean_sem(const std::vector<double>& values);

/// Elementwise a - b summarized as mean and SEM; index sets must align.
MeanSem pairwise_improvement(const std::vector<double>& a, const std::vector<double>& b);

/// Direction-aware mean rank per method (1 = best, ties share the mean of
/// tied ranks). methods x metrics table; higher_better is per metric.
std::vector<double> comparative_placement(const std::vector<std::vector<double>>& table,
                                          const std::vector<bool>& higher_better);

/// Mean over samples of MSE(y, all-ones) - MSE(y, y_hat); positive when the
/// model beats the naive always-on predictor.
double naive_baseline_delta(const RedcliffModel& model, const BatchData& data);

// Per-factor scoring of a standardized estimate against binarized truth.
// Estimated graphs stay real-valued scores; SHD binarizes the estimate at the
// optimal-F1 threshold. Diagonals never participate.
struct FactorMetrics {
  Index est_index = 0;
  Index truth_index = 0;
  double optimal_f1 = 0.0;
  double f1_threshold = 0.0;
  double roc_auc = 0.0;
  int shd_upper = 0;
  int shd_lower = 0;
};

std::vector<FactorMetrics> score_against_truth(const GraphEstimate& est,
                                               const GraphEstimate& truth, Index b);

/// Binarized (nonzero off-diagonal) true graphs of a system, one per factor.
GraphEstimate truth_graphs(const SystemSpec& spec);

struct EvalReport {
  std::string run_label;
  std::vector<FactorMetrics> rows;
  MeanSem agg_f1, agg_auc;
  MeanSem agg_shd_upper, agg_shd_lower;
};

EvalReport make_report(const std::string& run_label, const std::vector<FactorMetrics>& rows);

std::string report_to_json(const EvalReport& report,
                           const std::vector<std::vector<std::pair<Index, Index>>>& top_edges,
                           Index top_k);
std::string report_to_csv(const EvalReport& report);

/// Strongest K off-diagonal edges of a score matrix, value-descending with
/// (i, j) tie order.
std::vector<std::pair<Index, Index>> top_k_edges(const Eigen::MatrixXd& m, Index k);

}  // namespace redcliff
