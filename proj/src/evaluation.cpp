#include "redcliff/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace redcliff {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double f1_at_threshold(const std::vector<double>& scores, const std::vector<int>& labels,
                       double threshold) {
  int tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] > threshold;
    if (pred && labels[i]) ++tp;
    if (pred && !labels[i]) ++fp;
    if (!pred && labels[i]) ++fn;
  }
  const int denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

}  // namespace

Eigen::MatrixXd lag_sum_matrices(const std::vector<Eigen::MatrixXd>& slices) {
  if (slices.empty()) throw std::invalid_argument("lag_sum_matrices: no slices");
  Eigen::MatrixXd out = slices[0];
  for (std::size_t l = 1; l < slices.size(); ++l) out += slices[l];
  return out;
}

GraphEstimate standardize(const GraphEstimate& raw, Index n_true_factors) {
  if (raw.matrices.empty()) throw std::invalid_argument("standardize: empty estimate");
  for (const auto& m : raw.matrices)
    if (m.rows() != m.cols()) throw std::invalid_argument("standardize: matrices must be square");
  GraphEstimate out;
  out.source = raw.source;
  if (raw.matrices.size() == 1 && n_true_factors > 1) {
    out.matrices.assign(static_cast<std::size_t>(n_true_factors), raw.matrices[0]);
  } else {
    out.matrices = raw.matrices;
  }
  return out;
}

std::vector<double> offdiag_values(const Eigen::MatrixXd& m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.rows() * (m.cols() - 1)));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      if (i != j) out.push_back(m(i, j));
  return out;
}

std::vector<int> offdiag_binary(const Eigen::MatrixXd& m) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(m.rows() * (m.cols() - 1)));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      if (i != j) out.push_back(m(i, j) != 0.0 ? 1 : 0);
  return out;
}

F1Result optimal_f1(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("optimal_f1: length mismatch");
  if (scores.empty()) throw std::invalid_argument("optimal_f1: empty input");
  if (std::none_of(labels.begin(), labels.end(), [](int l) { return l != 0; }))
    throw std::invalid_argument("optimal_f1: undefined without positive labels");

  std::vector<double> uniq = scores;
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());

  std::vector<double> candidates;
  candidates.push_back(-std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i + 1 < uniq.size(); ++i)
    candidates.push_back(uniq[i] + 0.5 * (uniq[i + 1] - uniq[i]));
  candidates.push_back(std::numeric_limits<double>::infinity());

  F1Result best{-1.0, 0.0};
  for (double threshold : candidates) {
    const double f1 = f1_at_threshold(scores, labels, threshold);
    if (f1 > best.f1) best = {f1, threshold};
  }
  return best;
}

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("roc_auc: length mismatch");
  const auto n_pos = static_cast<double>(std::count_if(labels.begin(), labels.end(),
                                                       [](int l) { return l != 0; }));
  const auto n_neg = static_cast<double>(labels.size()) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0)
    throw std::invalid_argument("roc_auc: both classes must be present");

  // Rank-sum with midrank ties.
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<double> rank(scores.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && scores[idx[j + 1]] == scores[idx[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = mid;
    i = j + 1;
  }
  double rank_sum = 0.0;
  for (std::size_t k = 0; k < labels.size(); ++k)
    if (labels[k]) rank_sum += rank[k];
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

std::pair<int, int> shd_split(const Eigen::MatrixXi& pred, const Eigen::MatrixXi& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols() || pred.rows() != pred.cols())
    throw std::invalid_argument("shd_split: matrices must be square and same shape");
  int upper = 0, lower = 0;
  for (Index i = 0; i < pred.rows(); ++i)
    for (Index j = 0; j < pred.cols(); ++j) {
      if (i == j) continue;
      const bool diff = (pred(i, j) != 0) != (truth(i, j) != 0);
      if (!diff) continue;
      if (i < j)
        ++upper;
      else
        ++lower;
    }
  return {upper, lower};
}

std::vector<Index> match_factors(const GraphEstimate& est, const GraphEstimate& truth, Index b) {
  const auto n_est = static_cast<Index>(est.matrices.size());
  const auto n_truth = static_cast<Index>(truth.matrices.size());
  if (b > std::min(n_est, n_truth))
    throw std::invalid_argument("match_factors: B exceeds available factors");
  std::vector<Index> assignment(static_cast<std::size_t>(n_est), -1);
  std::vector<bool> truth_used(static_cast<std::size_t>(n_truth), false);
  for (Index i = 0; i < b; ++i) {
    assignment[static_cast<std::size_t>(i)] = i;
    truth_used[static_cast<std::size_t>(i)] = true;
  }

  // Greedy best-F1 pairing for the unsupervised remainder.
  std::vector<Index> free_est;
  for (Index e = b; e < n_est; ++e) free_est.push_back(e);
  while (!free_est.empty()) {
    Index best_e = -1, best_t = -1;
    double best_f1 = -1.0;
    for (Index e : free_est) {
      const auto scores = offdiag_values(est.matrices[static_cast<std::size_t>(e)]);
      for (Index t = 0; t < n_truth; ++t) {
        if (truth_used[static_cast<std::size_t>(t)]) continue;
        const auto labels = offdiag_binary(truth.matrices[static_cast<std::size_t>(t)]);
        const double f1 = optimal_f1(scores, labels).f1;
        if (f1 > best_f1) {
          best_f1 = f1;
          best_e = e;
          best_t = t;
        }
      }
    }
    if (best_e < 0) break;  // no truths left
    assignment[static_cast<std::size_t>(best_e)] = best_t;
    truth_used[static_cast<std::size_t>(best_t)] = true;
    free_est.erase(std::find(free_est.begin(), free_est.end(), best_e));
  }
  return assignment;
}

MeanSem mean_sem(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("mean_sem: empty input");
  const auto n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double stddev = std::sqrt(ss / (n - 1.0));
  return {mean, stddev / std::sqrt(n)};
}

MeanSem pairwise_improvement(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("pairwise_improvement: index mismatch");
  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
  return mean_sem(diff);
}

std::vector<double> comparative_placement(const std::vector<std::vector<double>>& table,
                                          const std::vector<bool>& higher_better) {
  if (table.empty()) throw std::invalid_argument("comparative_placement: empty table");
  const std::size_t n_methods = table.size();
  const std::size_t n_metrics = higher_better.size();
  for (const auto& row : table)
    if (row.size() != n_metrics)
      throw std::invalid_argument("comparative_placement: missing cells");

  std::vector<double> placement(n_methods, 0.0);
  for (std::size_t m = 0; m < n_metrics; ++m) {
    std::vector<double> keyed(n_methods);
    for (std::size_t i = 0; i < n_methods; ++i)
      keyed[i] = higher_better[m] ? -table[i][m] : table[i][m];
    // Rank ascending; tied values share the mean of their ranks.
    std::vector<std::size_t> idx(n_methods);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return keyed[a] < keyed[b]; });
    std::size_t i = 0;
    while (i < n_methods) {
      std::size_t j = i;
      while (j + 1 < n_methods && keyed[idx[j + 1]] == keyed[idx[i]]) ++j;
      const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) placement[idx[k]] += mid;
      i = j + 1;
    }
  }
  for (auto& p : placement) p /= static_cast<double>(n_metrics);
  return placement;
}

double naive_baseline_delta(const RedcliffModel& model, const BatchData& data) {
  if (data.size() == 0) throw std::invalid_argument("naive_baseline_delta: empty data");
  const Index b = data.labels.cols();
  if (b == 0) throw std::invalid_argument("naive_baseline_delta: data has no labels");
  Tensor x_state = Tensor::from_matrix(data.x_state);
  Tensor x_fact = Tensor::from_matrix(data.x_fact);
  const auto fwd = model.forward(x_state, x_fact);

  double acc = 0.0;
  const Eigen::VectorXd ones = naive_state_prediction(b);
  for (Index s = 0; s < data.size(); ++s) {
    const Eigen::VectorXd y = data.labels.row(s).transpose();
    const double naive = (y - ones).squaredNorm() / static_cast<double>(b);
    Eigen::VectorXd y_hat = ones;
    if (fwd.y_hat.defined())
      y_hat = fwd.y_hat.matrix().row(s).transpose();
    const double model_mse = (y - y_hat).squaredNorm() / static_cast<double>(b);
    acc += naive - model_mse;
  }
  return acc / static_cast<double>(data.size());
}

std::vector<FactorMetrics> score_against_truth(const GraphEstimate& est,
                                               const GraphEstimate& truth, Index b) {
  const GraphEstimate standardized = standardize(est, static_cast<Index>(truth.matrices.size()));
  const auto assignment = match_factors(standardized, truth, b);
  std::vector<FactorMetrics> rows;
  for (std::size_t e = 0; e < standardized.matrices.size(); ++e) {
    const Index t = assignment[e];
    if (t < 0) continue;
    const auto& est_m = standardized.matrices[e];
    const auto& truth_m = truth.matrices[static_cast<std::size_t>(t)];
    if (est_m.rows() != truth_m.rows())
      throw std::invalid_argument("score_against_truth: node-count mismatch");
    FactorMetrics fm;
    fm.est_index = static_cast<Index>(e);
    fm.truth_index = t;
    const auto scores = offdiag_values(est_m);
    const auto labels = offdiag_binary(truth_m);
    const F1Result f1 = optimal_f1(scores, labels);
    fm.optimal_f1 = f1.f1;
    fm.f1_threshold = f1.threshold;
    fm.roc_auc = roc_auc(scores, labels);
    Eigen::MatrixXi pred = (est_m.array() > f1.threshold).cast<int>();
    Eigen::MatrixXi truth_bin = (truth_m.array() != 0.0).cast<int>();
    pred.diagonal().setZero();
    truth_bin.diagonal().setZero();
    const auto [upper, lower] = shd_split(pred, truth_bin);
    fm.shd_upper = upper;
    fm.shd_lower = lower;
    rows.push_back(fm);
  }
  return rows;
}

GraphEstimate truth_graphs(const SystemSpec& spec) {
  GraphEstimate truth;
  truth.source = "ground-truth";
  for (const auto& f : spec.factors) {
    Eigen::MatrixXd m = f.lag_abs_sum();
    m.diagonal().setZero();
    truth.matrices.push_back((m.array() != 0.0).cast<double>());
  }
  return truth;
}

EvalReport make_report(const std::string& run_label, const std::vector<FactorMetrics>& rows) {
  EvalReport r;
  r.run_label = run_label;
  r.rows = rows;
  std::vector<double> f1s, aucs, shu, shl;
  for (const auto& row : rows) {
    f1s.push_back(row.optimal_f1);
    aucs.push_back(row.roc_auc);
    shu.push_back(row.shd_upper);
    shl.push_back(row.shd_lower);
  }
  r.agg_f1 = mean_sem(f1s);
  r.agg_auc = mean_sem(aucs);
  r.agg_shd_upper = mean_sem(shu);
  r.agg_shd_lower = mean_sem(shl);
  return r;
}

std::string report_to_json(const EvalReport& report,
                           const std::vector<std::vector<std::pair<Index, Index>>>& top_edges,
                           Index top_k) {
  ordered_json j;
  j["format_version"] = 1;
  j["run_label"] = report.run_label;
  ordered_json rows = ordered_json::array();
  for (const auto& r : report.rows) {
    ordered_json row;
    row["factor_est"] = r.est_index;
    row["factor_truth"] = r.truth_index;
    row["optimal_f1"] = r.optimal_f1;
    row["f1_threshold"] = r.f1_threshold;
    row["roc_auc"] = r.roc_auc;
    row["shd_upper"] = r.shd_upper;
    row["shd_lower"] = r.shd_lower;
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  ordered_json agg;
  auto ms = [](const MeanSem& m) {
    ordered_json o;
    o["mean"] = m.mean;
    o["sem"] = m.sem;
    return o;
  };
  agg["optimal_f1"] = ms(report.agg_f1);
  agg["roc_auc"] = ms(report.agg_auc);
  agg["shd_upper"] = ms(report.agg_shd_upper);
  agg["shd_lower"] = ms(report.agg_shd_lower);
  j["aggregate"] = std::move(agg);
  if (!top_edges.empty()) {
    j["top_k"] = top_k;
    ordered_json edges = ordered_json::array();
    for (const auto& factor_edges : top_edges) {
      ordered_json fe = ordered_json::array();
      for (const auto& [i, jj] : factor_edges) fe.push_back(ordered_json::array({i, jj}));
      edges.push_back(std::move(fe));
    }
    j["top_edges"] = std::move(edges);
  }
  return j.dump(2) + "\n";
}

std::string report_to_csv(const EvalReport& report) {
  std::string csv = "run,factor_est,factor_truth,optimal_f1,f1_threshold,roc_auc,shd_upper,shd_lower\n";
  for (const auto& r : report.rows) {
    csv += report.run_label + "," + std::to_string(r.est_index) + "," +
           std::to_string(r.truth_index) + "," + g17(r.optimal_f1) + "," + g17(r.f1_threshold) +
           "," + g17(r.roc_auc) + "," + std::to_string(r.shd_upper) + "," +
           std::to_string(r.shd_lower) + "\n";
  }
  return csv;
}

std::vector<std::pair<Index, Index>> top_k_edges(const Eigen::MatrixXd& m, Index k) {
  std::vector<std::pair<Index, Index>> edges;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      if (i != j) edges.emplace_back(i, j);
  std::stable_sort(edges.begin(), edges.end(), [&](const auto& a, const auto& b) {
    return m(a.first, a.second) > m(b.first, b.second);
  });
  if (static_cast<Index>(edges.size()) > k) edges.resize(static_cast<std::size_t>(k));
  return edges;
}

}  // namespace redcliff
