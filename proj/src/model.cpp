#include "redcliff/model.hpp"

#include <cmath>
#include <stdexcept>

namespace redcliff {

namespace {

Tensor init_linear(Index out, Index in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Eigen::ArrayXd w(out * in);
  for (Index i = 0; i < w.size(); ++i) w[i] = rng.uniform(-bound, bound);
  return Tensor::from_flat({out, in}, std::move(w), true);
}

Tensor init_bias(Index out, Index in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Eigen::ArrayXd b(out);
  for (Index i = 0; i < b.size(); ++i) b[i] = rng.uniform(-bound, bound);
  return Tensor::from_flat({out}, std::move(b), true);
}

Tensor lag_log_weights(Index n_c, Index tau_in) {
  // log(t+1) per lag slice, t counted from 1 at the most recent lag.
  Eigen::ArrayXd w(n_c * n_c * tau_in);
  for (Index e = 0; e < n_c * n_c; ++e)
    for (Index l = 0; l < tau_in; ++l) w[e * tau_in + l] = std::log(static_cast<double>(l + 2));
  return Tensor::from_flat({n_c, n_c, tau_in}, std::move(w));
}

}  // namespace

FactorNet FactorNet::make(Index n_c, Index tau_in, const std::vector<Index>& hidden, Rng& rng) {
  if (n_c < 1 || tau_in < 1) throw std::invalid_argument("FactorNet: n_c and tau_in must be >= 1");
  if (hidden.empty()) throw std::invalid_argument("FactorNet: need at least one hidden width");
  FactorNet f;
  f.n_c = n_c;
  f.tau_in = tau_in;
  const Index in = n_c * tau_in;
  for (Index i = 0; i < n_c; ++i) {
    NodeNet node;
    node.first_w = init_linear(hidden[0], in, rng);
    node.first_b = init_bias(hidden[0], in, rng);
    for (std::size_t h = 1; h < hidden.size(); ++h) {
      node.deeper.emplace_back(init_linear(hidden[h], hidden[h - 1], rng),
                               init_bias(hidden[h], hidden[h - 1], rng));
    }
    node.out_w = init_linear(1, hidden.back(), rng);
    node.out_b = init_bias(1, hidden.back(), rng);
    f.nodes.push_back(std::move(node));
  }
  return f;
}

Tensor FactorNet::forward(const Tensor& x) const {
  if (x.cols() != n_c * tau_in)
    throw std::invalid_argument("FactorNet::forward: input width != n_c*tau_in");
  std::vector<Tensor> outs;
  outs.reserve(nodes.size());
  for (const auto& node : nodes) {
    Tensor h = relu(linear(x, node.first_w, node.first_b));
    for (const auto& [w, b] : node.deeper) h = relu(linear(h, w, b));
    outs.push_back(linear(h, node.out_w, node.out_b));
  }
  return concat_cols(outs);
}

Eigen::VectorXd FactorNet::forecast(const Eigen::MatrixXd& window) const {
  if (window.rows() != n_c || window.cols() != tau_in)
    throw std::invalid_argument("FactorNet::forecast: window must be n_c x tau_in");
  Eigen::ArrayXd flat(n_c * tau_in);
  for (Index j = 0; j < n_c; ++j)
    for (Index c = 0; c < tau_in; ++c) flat[j * tau_in + c] = window(j, c);
  Tensor x = Tensor::from_flat({1, n_c * tau_in}, std::move(flat));
  return forward(x).matrix().row(0).transpose();
}

Tensor FactorNet::adjacency() const {
  std::vector<Tensor> first;
  first.reserve(nodes.size());
  for (const auto& node : nodes) first.push_back(node.first_w);
  return extract_adjacency(first, n_c, tau_in);
}

void FactorNet::collect_params(std::vector<Tensor>& params, std::vector<std::string>& names,
                               const std::string& prefix) const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string base = prefix + ".node" + std::to_string(i);
    params.push_back(nodes[i].first_w);
    names.push_back(base + ".first_w");
    params.push_back(nodes[i].first_b);
    names.push_back(base + ".first_b");
    for (std::size_t h = 0; h < nodes[i].deeper.size(); ++h) {
      params.push_back(nodes[i].deeper[h].first);
      names.push_back(base + ".hidden" + std::to_string(h) + "_w");
      params.push_back(nodes[i].deeper[h].second);
      names.push_back(base + ".hidden" + std::to_string(h) + "_b");
    }
    params.push_back(nodes[i].out_w);
    names.push_back(base + ".out_w");
    params.push_back(nodes[i].out_b);
    names.push_back(base + ".out_b");
  }
}

StateModel StateModel::make(const ModelConfig& cfg, Rng& rng) {
  if (cfg.tau_cl < 1) throw std::invalid_argument("StateModel: tau_cl must be >= 1");
  if (cfg.B > cfg.n_k) throw std::invalid_argument("StateModel: B must be <= n_k");
  StateModel s;
  s.n_c = cfg.n_c;
  s.tau_in = cfg.tau_in;
  s.tau_cl = cfg.tau_cl;
  s.n_k = cfg.n_k;
  s.B = cfg.B;
  s.sigmoid_alpha = cfg.sigmoid_alpha;
  Index in = cfg.n_c * cfg.state_window();
  for (Index width : cfg.embed_hidden) {
    s.trunk.emplace_back(init_linear(width, in, rng), init_bias(width, in, rng));
    in = width;
  }
  s.trunk.emplace_back(init_linear(cfg.n_k, in, rng), init_bias(cfg.n_k, in, rng));
  s.alpha_scale = Tensor::full({cfg.n_k}, 1.0, true);
  s.alpha_bias = Tensor::zeros({cfg.n_k}, true);
  s.y_scale = Tensor::full({std::max<Index>(cfg.B, 0)}, 1.0, true);
  s.y_bias = Tensor::zeros({std::max<Index>(cfg.B, 0)}, true);
  return s;
}

StateModel::Out StateModel::forward(const Tensor& x_state) const {
  if (x_state.cols() != n_c * (tau_in + tau_cl))
    throw std::invalid_argument("StateModel::forward: input width != n_c*(tau_in+tau_cl)");
  Tensor h = x_state;
  for (std::size_t i = 0; i + 1 < trunk.size(); ++i)
    h = relu(linear(h, trunk[i].first, trunk[i].second));
  Out out;
  out.alpha_raw = linear(h, trunk.back().first, trunk.back().second);
  out.alpha = colwise_affine(out.alpha_raw, alpha_scale, alpha_bias);
  if (sigmoid_alpha) out.alpha = sigmoid(out.alpha);
  if (B > 0)
    out.y_hat = colwise_affine(slice_cols(out.alpha_raw, 0, B), y_scale, y_bias);
  return out;
}

Eigen::VectorXd StateModel::g_alpha_inverse(const Eigen::VectorXd& alpha) const {
  Eigen::VectorXd out(n_k);
  for (Index k = 0; k < n_k; ++k) out[k] = (alpha[k] - alpha_bias.data()[k]) / alpha_scale.data()[k];
  return out;
}

Eigen::VectorXd StateModel::g_y_forward(const Eigen::VectorXd& v) const {
  Eigen::VectorXd out(B);
  for (Index b = 0; b < B; ++b) out[b] = v[b] * y_scale.data()[b] + y_bias.data()[b];
  return out;
}

Eigen::VectorXd StateModel::g_y_inverse(const Eigen::VectorXd& y) const {
  Eigen::VectorXd out(B);
  for (Index b = 0; b < B; ++b) out[b] = (y[b] - y_bias.data()[b]) / y_scale.data()[b];
  return out;
}

void StateModel::project_invertible() {
  auto clamp = [](Eigen::ArrayXd& s) {
    for (Index i = 0; i < s.size(); ++i) {
      if (std::abs(s[i]) < kScaleFloor) s[i] = s[i] < 0.0 ? -kScaleFloor : kScaleFloor;
    }
  };
  clamp(alpha_scale.data());
  clamp(y_scale.data());
}

void StateModel::collect_params(std::vector<Tensor>& params, std::vector<std::string>& names) const {
  for (std::size_t i = 0; i < trunk.size(); ++i) {
    params.push_back(trunk[i].first);
    names.push_back("state.trunk" + std::to_string(i) + "_w");
    params.push_back(trunk[i].second);
    names.push_back("state.trunk" + std::to_string(i) + "_b");
  }
  params.push_back(alpha_scale);
  names.push_back("state.alpha_scale");
  params.push_back(alpha_bias);
  names.push_back("state.alpha_bias");
  params.push_back(y_scale);
  names.push_back("state.y_scale");
  params.push_back(y_bias);
  names.push_back("state.y_bias");
}

RedcliffModel RedcliffModel::make(const ModelConfig& cfg, Rng& rng) {
  if (cfg.n_k < 1) throw std::invalid_argument("RedcliffModel: n_k must be >= 1");
  if (cfg.B > cfg.n_k) throw std::invalid_argument("RedcliffModel: B must be <= n_k");
  RedcliffModel m;
  m.cfg = cfg;
  for (Index k = 0; k < cfg.n_k; ++k)
    m.factors.push_back(FactorNet::make(cfg.n_c, cfg.tau_in, cfg.gen_hidden, rng));
  if (cfg.has_state) m.state = StateModel::make(cfg, rng);
  return m;
}

RedcliffModel::Forward RedcliffModel::forward(const Tensor& x_state, const Tensor& x_fact) const {
  Forward out;
  std::vector<Tensor> factor_outs;
  factor_outs.reserve(factors.size());
  for (const auto& f : factors) factor_outs.push_back(f.forward(x_fact));

  if (state) {
    StateModel::Out s = state->forward(x_state);
    out.alpha = s.alpha;
    if (cfg.B > 0) out.y_hat = s.y_hat;
  }

  const bool weighted = state.has_value() && !cfg.alpha_pinned;
  Tensor x_hat;
  for (Index k = 0; k < cfg.n_k; ++k) {
    Tensor term = weighted
                      ? rowwise_scale(factor_outs[static_cast<std::size_t>(k)],
                                      slice_cols(out.alpha, k, 1))
                      : factor_outs[static_cast<std::size_t>(k)];
    x_hat = x_hat.defined() ? add(x_hat, term) : term;
  }
  out.x_hat = x_hat;
  return out;
}

std::vector<Tensor> RedcliffModel::factor_params() const {
  std::vector<Tensor> params;
  std::vector<std::string> names;
  for (std::size_t k = 0; k < factors.size(); ++k)
    factors[k].collect_params(params, names, "factor" + std::to_string(k));
  return params;
}

std::vector<Tensor> RedcliffModel::state_params() const {
  std::vector<Tensor> params;
  std::vector<std::string> names;
  if (state) state->collect_params(params, names);
  return params;
}

std::vector<Tensor> RedcliffModel::all_params() const {
  auto params = factor_params();
  auto s = state_params();
  params.insert(params.end(), s.begin(), s.end());
  return params;
}

std::vector<std::pair<std::string, Tensor>> RedcliffModel::named_params() const {
  std::vector<Tensor> params;
  std::vector<std::string> names;
  for (std::size_t k = 0; k < factors.size(); ++k)
    factors[k].collect_params(params, names, "factor" + std::to_string(k));
  if (state) state->collect_params(params, names);
  std::vector<std::pair<std::string, Tensor>> out;
  for (std::size_t i = 0; i < params.size(); ++i) out.emplace_back(names[i], params[i]);
  return out;
}

std::vector<Eigen::MatrixXd> RedcliffModel::adjacency_estimates() const {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(factors.size());
  for (const auto& f : factors) out.push_back(lag_sum(f.adjacency()).to_matrix());
  return out;
}

BatchData BatchData::rows(const std::vector<Index>& idx) const {
  BatchData b;
  const auto n = static_cast<Index>(idx.size());
  b.x_state.resize(n, x_state.cols());
  b.x_fact.resize(n, x_fact.cols());
  b.target.resize(n, target.cols());
  b.labels.resize(n, labels.cols());
  for (Index r = 0; r < n; ++r) {
    b.x_state.row(r) = x_state.row(idx[static_cast<std::size_t>(r)]);
    b.x_fact.row(r) = x_fact.row(idx[static_cast<std::size_t>(r)]);
    b.target.row(r) = target.row(idx[static_cast<std::size_t>(r)]);
    b.labels.row(r) = labels.row(idx[static_cast<std::size_t>(r)]);
  }
  return b;
}

BatchData make_training_matrices(const WindowedDataset& ds, Index tau_in, Index tau_cl) {
  const Index window = tau_in + tau_cl;
  if (ds.t_window < window + 1)
    throw std::invalid_argument("make_training_matrices: windows shorter than tau_in+tau_cl+1");
  const auto n = static_cast<Index>(ds.samples.size());
  const Index n_c = ds.n_c;
  BatchData b;
  b.x_state.resize(n, n_c * window);
  b.x_fact.resize(n, n_c * tau_in);
  b.target.resize(n, n_c);
  b.labels.resize(n, ds.B);
  const Index ctx_start = ds.t_window - 1 - window;  // context ends right before the target step
  for (Index s = 0; s < n; ++s) {
    const auto& w = ds.samples[static_cast<std::size_t>(s)];
    for (Index j = 0; j < n_c; ++j) {
      for (Index c = 0; c < window; ++c) b.x_state(s, j * window + c) = w.x(j, ctx_start + c);
      for (Index c = 0; c < tau_in; ++c)
        b.x_fact(s, j * tau_in + c) = w.x(j, ctx_start + tau_cl + c);
    }
    b.target.row(s) = w.x.col(ds.t_window - 1).transpose();
    b.labels.row(s) = w.y.transpose();
  }
  return b;
}

Tensor loss_f(const RedcliffModel& model, const RedcliffModel::Forward& fwd, const Tensor& target,
              double eta, double omega, double rho) {
  const Index n_c = model.cfg.n_c, tau_in = model.cfg.tau_in;
  const Tensor weights = lag_log_weights(n_c, tau_in);

  std::vector<Tensor> adjacencies;
  adjacencies.reserve(model.factors.size());
  for (const auto& f : model.factors) adjacencies.push_back(f.adjacency());

  Tensor lag_term;
  for (const auto& adj : adjacencies) {
    Tensor term = sum(mul(adj, weights));
    lag_term = lag_term.defined() ? add(lag_term, term) : term;
  }

  Tensor total = add(scale(lag_term, eta), scale(mse(fwd.x_hat, target), omega));

  if (model.cfg.n_k > 1 && rho != 0.0) {
    const Tensor identity = Tensor::from_matrix(Eigen::MatrixXd::Identity(n_c, n_c));
    std::vector<Tensor> centered;
    centered.reserve(adjacencies.size());
    for (const auto& adj : adjacencies) centered.push_back(sub(lag_sum(adj), identity));
    Tensor cos_term;
    for (std::size_t p = 0; p < centered.size(); ++p)
      for (std::size_t q = p + 1; q < centered.size(); ++q) {
        Tensor c = cosine_sim(centered[p], centered[q]);
        cos_term = cos_term.defined() ? add(cos_term, c) : c;
      }
    total = add(total, scale(cos_term, rho));
  }
  return total;
}

Tensor loss_g(const RedcliffModel::Forward& fwd, double gamma) {
  if (!fwd.alpha.defined()) return Tensor::scalar(0.0);
  return scale(add(l1_norm(fwd.alpha), Tensor::scalar(-1.0)), gamma);
}

LossBreakdown total_loss(const RedcliffModel& model, const RedcliffModel::Forward& fwd,
                         const Tensor& target, const Tensor& labels, const LossCoefficients& c) {
  LossBreakdown out;
  Tensor lf = loss_f(model, fwd, target, c.eta, c.omega, c.rho);
  Tensor lg = loss_g(fwd, c.gamma);
  out.total = add(lf, lg);
  if (c.lambda != 0.0 && fwd.y_hat.defined())
    out.total = add(out.total, scale(mse(labels, fwd.y_hat), c.lambda));

  // Unweighted components for logging; recomputed without touching the tape.
  const Index n_c = model.cfg.n_c, tau_in = model.cfg.tau_in;
  const Eigen::ArrayXd w = lag_log_weights(n_c, tau_in).data();
  for (const auto& f : model.factors) {
    Tensor adj = f.adjacency();
    out.lag_l1 += (adj.data() * w).sum();
  }
  out.forecast_mse = (fwd.x_hat.data() - target.data()).square().mean();
  if (model.cfg.n_k > 1) {
    std::vector<Eigen::MatrixXd> tilde = model.adjacency_estimates();
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n_c, n_c);
    for (std::size_t p = 0; p < tilde.size(); ++p)
      for (std::size_t q = p + 1; q < tilde.size(); ++q) {
        const Eigen::MatrixXd a = tilde[p] - eye, b = tilde[q] - eye;
        const double na = a.norm(), nb = b.norm();
        out.cos_penalty +=
            (na < 1e-12 || nb < 1e-12) ? 0.0 : a.cwiseProduct(b).sum() / (na * nb);
      }
  }
  if (fwd.alpha.defined()) out.alpha_l1 = fwd.alpha.data().abs().sum() - 1.0;
  if (fwd.y_hat.defined())
    out.label_mse = (labels.data() - fwd.y_hat.data()).square().mean();
  return out;
}

Eigen::VectorXd naive_state_prediction(Index b) {
  if (b < 1) throw std::invalid_argument("naive_state_prediction: B must be >= 1");
  return Eigen::VectorXd::Ones(b);
}

std::vector<bool> behavior_presence(const Eigen::VectorXd& y_hat, const Eigen::VectorXd& c) {
  if (y_hat.size() != c.size())
    throw std::invalid_argument("behavior_presence: length mismatch");
  std::vector<bool> out(static_cast<std::size_t>(y_hat.size()));
  for (Index b = 0; b < y_hat.size(); ++b) out[static_cast<std::size_t>(b)] = y_hat[b] > c[b];
  return out;
}

}  // namespace redcliff
