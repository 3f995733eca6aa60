#include "redcliff/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "json.hpp"
#include "redcliff/io.hpp"

namespace redcliff {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<Index> shuffled_indices(Index n, Rng& rng) {
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  for (Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(i + 1)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  return idx;
}

struct BatchTensors {
  Tensor x_state, x_fact, target, labels;
};

BatchTensors to_tensors(const BatchData& b) {
  BatchTensors t;
  t.x_state = Tensor::from_matrix(b.x_state);
  t.x_fact = Tensor::from_matrix(b.x_fact);
  t.target = Tensor::from_matrix(b.target);
  t.labels = Tensor::from_matrix(b.labels);
  return t;
}

AdamState make_adam(const std::vector<Tensor>& params, double lr, const TrainConfig& cfg) {
  AdamState s;
  s.learning_rate = lr;
  s.beta1 = 0.9;
  s.beta2 = 0.999;
  s.epsilon = cfg.eps;
  s.weight_decay = cfg.weight_decay;
  s.init(params);
  return s;
}

void check_finite(double loss, const char* phase, Index epoch) {
  if (!std::isfinite(loss))
    throw DivergenceError(std::string("training diverged (non-finite loss) in ") + phase +
                          " epoch " + std::to_string(epoch));
}

}  // namespace

std::string train_config_to_json(const TrainConfig& c) {
  ordered_json j;
  j["eta"] = c.eta;
  j["omega"] = c.omega;
  j["rho"] = c.rho;
  j["gamma"] = c.gamma;
  j["lambda"] = c.lambda;
  j["gen_lr"] = c.gen_lr;
  j["embed_lr"] = c.embed_lr;
  j["weight_decay"] = c.weight_decay;
  j["eps"] = c.eps;
  j["batch_size"] = c.batch_size;
  j["max_iter"] = c.max_iter;
  j["pretrain_epochs"] = c.pretrain_epochs;
  j["acclimation_epochs"] = c.acclimation_epochs;
  j["n_k"] = c.n_k;
  j["tau_in"] = c.tau_in;
  j["embed_lag"] = c.embed_lag;
  j["gen_hidden"] = c.gen_hidden;
  j["embed_hidden"] = c.embed_hidden;
  j["criterion_cos_multiplier"] = c.criterion_cos_multiplier;
  j["sigmoid_alpha"] = c.sigmoid_alpha;
  j["rho_zero"] = c.rho_zero;
  j["single_factor"] = c.single_factor;
  j["alpha_pinned_one"] = c.alpha_pinned_one;
  j["lambda_zero"] = c.lambda_zero;
  j["seed"] = c.seed;
  return j.dump(2) + "\n";
}

TrainConfig train_config_from_json(const std::string& text) {
  const auto j = ordered_json::parse(text);
  TrainConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("eta", c.eta);
  get("omega", c.omega);
  get("rho", c.rho);
  get("gamma", c.gamma);
  get("lambda", c.lambda);
  get("gen_lr", c.gen_lr);
  get("embed_lr", c.embed_lr);
  get("weight_decay", c.weight_decay);
  get("eps", c.eps);
  get("batch_size", c.batch_size);
  get("max_iter", c.max_iter);
  get("pretrain_epochs", c.pretrain_epochs);
  get("acclimation_epochs", c.acclimation_epochs);
  get("n_k", c.n_k);
  get("tau_in", c.tau_in);
  get("embed_lag", c.embed_lag);
  get("gen_hidden", c.gen_hidden);
  get("embed_hidden", c.embed_hidden);
  get("criterion_cos_multiplier", c.criterion_cos_multiplier);
  get("sigmoid_alpha", c.sigmoid_alpha);
  get("rho_zero", c.rho_zero);
  get("single_factor", c.single_factor);
  get("alpha_pinned_one", c.alpha_pinned_one);
  get("lambda_zero", c.lambda_zero);
  get("seed", c.seed);
  return c;
}

TrainConfig apply_ablation(const TrainConfig& cfg) {
  const int n_flags = static_cast<int>(cfg.rho_zero) + static_cast<int>(cfg.single_factor) +
                      static_cast<int>(cfg.alpha_pinned_one) + static_cast<int>(cfg.lambda_zero);
  if (n_flags > 1)
    throw std::invalid_argument("apply_ablation: at most one ablation flag per run");
  TrainConfig out = cfg;
  if (cfg.rho_zero) out.rho = 0.0;
  if (cfg.lambda_zero) out.lambda = 0.0;
  if (cfg.single_factor) out.n_k = 1;
  return out;
}

LossCoefficients resolve_coefficients(const TrainConfig& cfg, Index n_c, Index n_k) {
  LossCoefficients c;
  c.omega = cfg.omega;
  c.gamma = cfg.gamma;
  c.lambda = cfg.lambda_zero ? 0.0 : cfg.lambda;
  if (cfg.eta >= 0.0) {
    c.eta = cfg.eta;
  } else {
    c.eta = 0.1 / (static_cast<double>(n_k) *
                   std::sqrt(static_cast<double>(n_c) * static_cast<double>(n_c) - 1.0));
  }
  if (cfg.rho_zero) {
    c.rho = 0.0;
  } else if (cfg.rho >= 0.0) {
    c.rho = cfg.rho;
  } else {
    const double denom = static_cast<double>(n_k * (n_k - 1)) / 2.0;
    c.rho = denom > 0.0 ? 1.0 / denom : 0.0;
  }
  return c;
}

ModelConfig model_config_from(const TrainConfig& cfg, Index n_c, Index dataset_b) {
  TrainConfig t = apply_ablation(cfg);
  ModelConfig m;
  m.n_c = n_c;
  m.n_k = t.n_k > 0 ? t.n_k : std::max<Index>(dataset_b, 1);
  m.tau_in = t.tau_in;
  if (t.embed_lag <= t.tau_in)
    throw std::invalid_argument("embed_lag must exceed tau_in (tau_cl >= 1)");
  m.tau_cl = t.embed_lag - t.tau_in;
  m.gen_hidden = t.gen_hidden;
  m.embed_hidden = t.embed_hidden;
  m.sigmoid_alpha = t.sigmoid_alpha;
  if (t.single_factor) {
    m.has_state = false;
    m.B = 0;
    m.n_k = 1;
  } else {
    m.has_state = true;
    m.alpha_pinned = t.alpha_pinned_one;
    m.B = std::min<Index>(dataset_b, m.n_k);
  }
  return m;
}

double criterion_value(const CriterionComponents& c, const LossCoefficients& coeff) {
  return coeff.omega * c.forecast + coeff.lambda * c.label + coeff.rho * c.cos_sim;
}

CriterionComponents stopping_criterion(const RedcliffModel& model, const BatchData& val,
                                       const TrainConfig& cfg) {
  if (val.size() == 0) throw std::invalid_argument("stopping_criterion: validation set is empty");
  const BatchTensors t = to_tensors(val);
  const auto fwd = model.forward(t.x_state, t.x_fact);
  CriterionComponents out;
  out.forecast = (fwd.x_hat.data() - t.target.data()).square().mean();
  if (fwd.y_hat.defined() && val.labels.cols() > 0)
    out.label = (fwd.y_hat.data() - t.labels.data()).square().mean();

  if (model.cfg.n_k > 1) {
    std::vector<Eigen::MatrixXd> tilde = model.adjacency_estimates();
    for (auto& m : tilde) {
      const double mx = m.maxCoeff();
      // Fully pruned factors normalize to all-zeros, contributing 0.
      m = mx < 1e-12 ? Eigen::MatrixXd::Zero(m.rows(), m.cols()) : Eigen::MatrixXd(m / mx);
    }
    double acc = 0.0;
    for (std::size_t p = 0; p < tilde.size(); ++p)
      for (std::size_t q = p + 1; q < tilde.size(); ++q) {
        const double na = tilde[p].norm(), nb = tilde[q].norm();
        if (na >= 1e-12 && nb >= 1e-12)
          acc += tilde[p].cwiseProduct(tilde[q]).sum() / (na * nb);
      }
    out.cos_sim = cfg.criterion_cos_multiplier * acc;
  }
  return out;
}

std::size_t select_checkpoint(const std::vector<CheckpointRecord>& records) {
  if (records.empty()) throw std::invalid_argument("select_checkpoint: no records");
  std::size_t best = 0;
  for (std::size_t i = 1; i < records.size(); ++i)
    if (records[i].criterion_value < records[best].criterion_value) best = i;
  return best;
}

std::vector<EpochStats> pretrain_state(RedcliffModel& model, const BatchData& train,
                                       const BatchData& val, const TrainConfig& raw_cfg) {
  const TrainConfig cfg = apply_ablation(raw_cfg);
  std::vector<EpochStats> history;
  if (!model.state || cfg.pretrain_epochs == 0) return history;
  if (train.size() == 0) throw std::invalid_argument("pretrain_state: empty dataset");

  const LossCoefficients coeff = resolve_coefficients(cfg, model.cfg.n_c, model.cfg.n_k);
  auto params = model.state_params();
  AdamState opt = make_adam(params, cfg.embed_lr, cfg);
  Rng shuffle = Rng(cfg.seed).fork(21);

  for (Index epoch = 1; epoch <= cfg.pretrain_epochs; ++epoch) {
    const auto order = shuffled_indices(train.size(), shuffle);
    EpochStats stats;
    stats.phase = "pretrain";
    stats.epoch = epoch;
    double loss_sum = 0.0, alpha_sum = 0.0, label_sum = 0.0;
    for (Index start = 0; start < train.size(); start += cfg.batch_size) {
      const Index len = std::min(cfg.batch_size, train.size() - start);
      std::vector<Index> idx(order.begin() + start, order.begin() + start + len);
      const BatchData batch = train.rows(idx);
      const BatchTensors t = to_tensors(batch);
      const StateModel::Out s = model.state->forward(t.x_state);
      RedcliffModel::Forward fwd;
      fwd.alpha = s.alpha;
      fwd.y_hat = s.y_hat;
      Tensor loss = loss_g(fwd, coeff.gamma);
      double label_mse = 0.0;
      if (coeff.lambda != 0.0 && fwd.y_hat.defined()) {
        Tensor sup = mse(t.labels, fwd.y_hat);
        label_mse = sup.item();
        loss = add(loss, scale(sup, coeff.lambda));
      } else if (fwd.y_hat.defined()) {
        label_mse = (t.labels.data() - fwd.y_hat.data()).square().mean();
      }
      check_finite(loss.item(), "pretrain", epoch);
      zero_grads(params);
      loss.backward();
      adam_step(params, opt);
      model.state->project_invertible();
      const double w = static_cast<double>(len);
      loss_sum += w * loss.item();
      alpha_sum += w * (fwd.alpha.data().abs().sum() - 1.0);
      label_sum += w * label_mse;
    }
    const double n = static_cast<double>(train.size());
    stats.train_loss = loss_sum / n;
    stats.alpha_l1 = alpha_sum / n;
    stats.label_mse = label_sum / n;
    stats.criterion_parts = stopping_criterion(model, val, cfg);
    stats.criterion = criterion_value(stats.criterion_parts, coeff);
    history.push_back(stats);
  }
  return history;
}

std::vector<EpochStats> acclimate_factors(RedcliffModel& model, const BatchData& train,
                                          const BatchData& val, const TrainConfig& raw_cfg) {
  const TrainConfig cfg = apply_ablation(raw_cfg);
  std::vector<EpochStats> history;
  if (cfg.acclimation_epochs == 0) return history;
  if (train.size() == 0) throw std::invalid_argument("acclimate_factors: empty dataset");

  const LossCoefficients coeff = resolve_coefficients(cfg, model.cfg.n_c, model.cfg.n_k);
  auto params = model.factor_params();
  AdamState opt = make_adam(params, cfg.gen_lr, cfg);
  Rng shuffle = Rng(cfg.seed).fork(22);

  for (Index epoch = 1; epoch <= cfg.acclimation_epochs; ++epoch) {
    const auto order = shuffled_indices(train.size(), shuffle);
    EpochStats stats;
    stats.phase = "acclimation";
    stats.epoch = epoch;
    double loss_sum = 0.0, forecast_sum = 0.0;
    for (Index start = 0; start < train.size(); start += cfg.batch_size) {
      const Index len = std::min(cfg.batch_size, train.size() - start);
      std::vector<Index> idx(order.begin() + start, order.begin() + start + len);
      const BatchData batch = train.rows(idx);
      const BatchTensors t = to_tensors(batch);
      const auto fwd = model.forward(t.x_state, t.x_fact);
      Tensor loss = loss_f(model, fwd, t.target, coeff.eta, coeff.omega, coeff.rho);
      check_finite(loss.item(), "acclimation", epoch);
      zero_grads(params);
      loss.backward();
      adam_step(params, opt);
      const double w = static_cast<double>(len);
      loss_sum += w * loss.item();
      forecast_sum += w * (fwd.x_hat.data() - t.target.data()).square().mean();
    }
    const double n = static_cast<double>(train.size());
    stats.train_loss = loss_sum / n;
    stats.forecast_mse = forecast_sum / n;
    stats.criterion_parts = stopping_criterion(model, val, cfg);
    stats.criterion = criterion_value(stats.criterion_parts, coeff);
    history.push_back(stats);
  }
  return history;
}

JointResult joint_train(RedcliffModel& model, const BatchData& train, const BatchData& val,
                        const TrainConfig& raw_cfg, const std::filesystem::path& out_dir) {
  const TrainConfig cfg = apply_ablation(raw_cfg);
  if (train.size() == 0) throw std::invalid_argument("joint_train: empty dataset");

  const LossCoefficients coeff = resolve_coefficients(cfg, model.cfg.n_c, model.cfg.n_k);
  auto gen_params = model.factor_params();
  auto embed_params = model.state_params();
  AdamState gen_opt = make_adam(gen_params, cfg.gen_lr, cfg);
  AdamState embed_opt = make_adam(embed_params, cfg.embed_lr, cfg);
  Rng shuffle = Rng(cfg.seed).fork(23);

  JointResult result;
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_idx = 0;
  for (Index epoch = 1; epoch <= cfg.max_iter; ++epoch) {
    const auto order = shuffled_indices(train.size(), shuffle);
    EpochStats stats;
    stats.phase = "joint";
    stats.epoch = epoch;
    double loss_sum = 0.0, lag_sum_ = 0.0, forecast_sum = 0.0, cos_sum = 0.0, alpha_sum = 0.0,
           label_sum = 0.0;
    for (Index start = 0; start < train.size(); start += cfg.batch_size) {
      const Index len = std::min(cfg.batch_size, train.size() - start);
      std::vector<Index> idx(order.begin() + start, order.begin() + start + len);
      const BatchData batch = train.rows(idx);
      const BatchTensors t = to_tensors(batch);
      const auto fwd = model.forward(t.x_state, t.x_fact);
      const LossBreakdown loss = total_loss(model, fwd, t.target, t.labels, coeff);
      check_finite(loss.total.item(), "joint", epoch);
      zero_grads(gen_params);
      zero_grads(embed_params);
      loss.total.backward();
      adam_step(gen_params, gen_opt);
      if (!embed_params.empty()) {
        adam_step(embed_params, embed_opt);
        model.state->project_invertible();
      }
      const double w = static_cast<double>(len);
      loss_sum += w * loss.total.item();
      lag_sum_ += w * loss.lag_l1;
      forecast_sum += w * loss.forecast_mse;
      cos_sum += w * loss.cos_penalty;
      alpha_sum += w * loss.alpha_l1;
      label_sum += w * loss.label_mse;
    }
    const double n = static_cast<double>(train.size());
    stats.train_loss = loss_sum / n;
    stats.lag_l1 = lag_sum_ / n;
    stats.forecast_mse = forecast_sum / n;
    stats.cos_penalty = cos_sum / n;
    stats.alpha_l1 = alpha_sum / n;
    stats.label_mse = label_sum / n;
    stats.criterion_parts = stopping_criterion(model, val, cfg);
    stats.criterion = criterion_value(stats.criterion_parts, coeff);
    result.stats.push_back(stats);

    CheckpointRecord rec;
    rec.epoch = epoch;
    rec.components = stats.criterion_parts;
    rec.criterion_value = stats.criterion;
    result.records.push_back(rec);
    if (stats.criterion < best) {
      best = stats.criterion;
      best_idx = result.records.size() - 1;
      if (!out_dir.empty()) save_checkpoint(model, out_dir / "checkpoint_best");
    }
  }
  if (!result.records.empty()) {
    result.records[best_idx].path = "checkpoint_best";
    if (!out_dir.empty()) {
      save_checkpoint(model, out_dir / "checkpoint_final");
      auto& last = result.records.back();
      last.path = last.path.empty() ? "checkpoint_final" : last.path;
    }
  }
  return result;
}

TrainOutcome run_training(RedcliffModel& model, const DatasetBundle& data, const TrainConfig& cfg,
                          const std::filesystem::path& out_dir) {
  const BatchData train = make_training_matrices(data.train, model.cfg.tau_in, model.cfg.tau_cl);
  const BatchData val = make_training_matrices(data.val, model.cfg.tau_in, model.cfg.tau_cl);

  TrainOutcome out;
  auto append = [&](const std::vector<EpochStats>& h) {
    out.history.insert(out.history.end(), h.begin(), h.end());
  };
  append(pretrain_state(model, train, val, cfg));
  append(acclimate_factors(model, train, val, cfg));
  JointResult joint = joint_train(model, train, val, cfg, out_dir);
  append(joint.stats);
  out.records = joint.records;
  out.best_record = select_checkpoint(joint.records);
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir / "history.csv", history_to_csv(out.history));
  }
  return out;
}

std::string history_to_csv(const std::vector<EpochStats>& history) {
  std::string csv =
      "phase,epoch,train_loss,lag_l1,forecast_mse,cos_penalty,alpha_l1,label_mse,"
      "criterion,criterion_forecast,criterion_label,criterion_cos\n";
  for (const auto& s : history) {
    csv += s.phase + "," + std::to_string(s.epoch) + "," + g17(s.train_loss) + "," +
           g17(s.lag_l1) + "," + g17(s.forecast_mse) + "," + g17(s.cos_penalty) + "," +
           g17(s.alpha_l1) + "," + g17(s.label_mse) + "," + g17(s.criterion) + "," +
           g17(s.criterion_parts.forecast) + "," + g17(s.criterion_parts.label) + "," +
           g17(s.criterion_parts.cos_sim) + "\n";
  }
  return csv;
}

void save_checkpoint(const RedcliffModel& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto named = model.named_params();
  ordered_json j;
  j["format_version"] = 1;
  j["architecture"] = "redcliff-cmlp";
  j["n_c"] = model.cfg.n_c;
  j["n_k"] = model.cfg.n_k;
  j["B"] = model.cfg.B;
  j["tau_in"] = model.cfg.tau_in;
  j["tau_cl"] = model.cfg.tau_cl;
  j["gen_hidden"] = model.cfg.gen_hidden;
  j["embed_hidden"] = model.cfg.embed_hidden;
  j["has_state"] = model.cfg.has_state;
  j["alpha_pinned"] = model.cfg.alpha_pinned;
  j["sigmoid_alpha"] = model.cfg.sigmoid_alpha;
  ordered_json params = ordered_json::array();
  for (const auto& [name, t] : named) {
    ordered_json p;
    p["name"] = name;
    p["shape"] = t.shape();
    params.push_back(std::move(p));
  }
  j["params"] = std::move(params);
  write_text_file(dir / "model.json", j.dump(2) + "\n");

  std::vector<std::byte> buf;
  for (const auto& [name, t] : named)
    append_f64(buf, t.data().data(), static_cast<std::size_t>(t.numel()));
  write_file_with_crc(dir / "weights.bin", buf);
}

RedcliffModel load_checkpoint(const std::filesystem::path& dir) {
  const auto j = ordered_json::parse(read_text_file(dir / "model.json"));
  if (j.at("format_version").get<int>() != 1)
    throw std::runtime_error("unsupported checkpoint format version");
  ModelConfig cfg;
  cfg.n_c = j.at("n_c").get<Index>();
  cfg.n_k = j.at("n_k").get<Index>();
  cfg.B = j.at("B").get<Index>();
  cfg.tau_in = j.at("tau_in").get<Index>();
  cfg.tau_cl = j.at("tau_cl").get<Index>();
  cfg.gen_hidden = j.at("gen_hidden").get<std::vector<Index>>();
  cfg.embed_hidden = j.at("embed_hidden").get<std::vector<Index>>();
  cfg.has_state = j.at("has_state").get<bool>();
  cfg.alpha_pinned = j.at("alpha_pinned").get<bool>();
  cfg.sigmoid_alpha = j.at("sigmoid_alpha").get<bool>();

  Rng scratch(0);
  RedcliffModel model = RedcliffModel::make(cfg, scratch);
  auto named = model.named_params();
  const auto& manifest = j.at("params");
  if (manifest.size() != named.size())
    throw std::runtime_error("checkpoint manifest does not match architecture");

  const auto buf = read_file_with_crc(dir / "weights.bin");
  std::size_t off = 0;
  for (std::size_t i = 0; i < named.size(); ++i) {
    const auto declared = manifest[i].at("shape").get<Shape>();
    if (manifest[i].at("name").get<std::string>() != named[i].first ||
        declared != named[i].second.shape())
      throw std::runtime_error("checkpoint parameter mismatch at " + named[i].first);
    read_f64(buf, off, named[i].second.data().data(),
             static_cast<std::size_t>(named[i].second.numel()));
  }
  if (off != buf.size()) throw std::runtime_error("checkpoint weights.bin has trailing data");
  return model;
}

std::uint32_t params_checksum(const std::vector<Tensor>& params) {
  std::uint32_t c = 0;
  for (const Tensor& p : params)
    c = crc32(p.data().data(), static_cast<std::size_t>(p.numel()) * 8, c);
  return c;
}

}  // namespace redcliff
