#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "redcliff/dataset.hpp"
#include "redcliff/io.hpp"
#include "redcliff/training.hpp"

using namespace redcliff;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("redcliff_train_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

DatasetBundle toy_data(std::uint64_t seed = 7, Index train_per_class = 24,
                       Index val_per_class = 8) {
  GenConfig cfg;
  cfg.n_c = 3;
  cfg.n_e = 2;
  cfg.n_k = 2;
  cfg.train_per_class = train_per_class;
  cfg.val_per_class = val_per_class;
  cfg.t_window = 40;
  cfg.stride = 40;
  cfg.seed = seed;
  cfg.system.innovations_var = 0.5;
  const GeneratedData d = generate_dataset(cfg);
  return DatasetBundle{d.train, d.val, ""};
}

TrainConfig quick_config(std::uint64_t seed = 1) {
  TrainConfig cfg;
  cfg.tau_in = 2;
  cfg.embed_lag = 8;
  cfg.gen_hidden = {6};
  cfg.embed_hidden = {12};
  cfg.batch_size = 16;
  cfg.pretrain_epochs = 8;
  cfg.acclimation_epochs = 6;
  cfg.max_iter = 10;
  cfg.seed = seed;
  return cfg;
}

RedcliffModel build_model(const TrainConfig& cfg, const DatasetBundle& data) {
  const ModelConfig mc = model_config_from(cfg, data.train.n_c, data.train.B);
  Rng rng = Rng(cfg.seed).fork(11);
  return RedcliffModel::make(mc, rng);
}

}  // namespace

// ---------------------------------------------------------------------------
// configuration
// ---------------------------------------------------------------------------

TEST_CASE("defaults resolve to the published hyperparameters") {
  TrainConfig cfg;
  CHECK(cfg.omega == 10.0);
  CHECK(cfg.lambda == 100.0);
  CHECK(cfg.gamma == 0.001);
  CHECK(cfg.batch_size == 128);
  CHECK(cfg.max_iter == 300);
  CHECK(cfg.gen_lr == 0.0005);
  CHECK(cfg.embed_lr == 0.0005);
  CHECK(cfg.weight_decay == 0.0001);
  CHECK(cfg.eps == 0.0001);
  CHECK(cfg.pretrain_epochs == 100);
  CHECK(cfg.acclimation_epochs == 100);
  CHECK(cfg.tau_in == 4);
  CHECK(cfg.embed_lag == 16);
  REQUIRE(cfg.gen_hidden.size() == 1);
  CHECK(cfg.gen_hidden[0] == 25);

  // eta = 0.1/(n_k sqrt(n_c^2-1)), rho = 1/sum_{i<n_k} i
  const LossCoefficients c = resolve_coefficients(cfg, 12, 3);
  CHECK(c.eta == doctest::Approx(0.1 / (3.0 * std::sqrt(143.0))).epsilon(1e-12));
  CHECK(c.rho == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  const LossCoefficients c2 = resolve_coefficients(cfg, 6, 2);
  CHECK(c2.rho == 1.0);
  const LossCoefficients c1 = resolve_coefficients(cfg, 6, 1);
  CHECK(c1.rho == 0.0);
}

TEST_CASE("config json round trip") {
  TrainConfig cfg = quick_config(42);
  cfg.rho = 0.25;
  cfg.criterion_cos_multiplier = 60.0;
  const TrainConfig back = train_config_from_json(train_config_to_json(cfg));
  CHECK(back.rho == 0.25);
  CHECK(back.seed == 42);
  CHECK(back.criterion_cos_multiplier == 60.0);
  CHECK(back.embed_lag == 8);
  CHECK(back.gen_hidden == cfg.gen_hidden);
}

TEST_CASE("ablations apply one at a time") {
  TrainConfig cfg;
  cfg.rho_zero = true;
  const TrainConfig a = apply_ablation(cfg);
  CHECK(resolve_coefficients(a, 6, 2).rho == 0.0);

  TrainConfig cfg2;
  cfg2.lambda_zero = true;
  CHECK(resolve_coefficients(apply_ablation(cfg2), 6, 2).lambda == 0.0);

  TrainConfig cfg3;
  cfg3.single_factor = true;
  const ModelConfig mc = model_config_from(cfg3, 6, 2);
  CHECK(mc.n_k == 1);
  CHECK(!mc.has_state);

  TrainConfig cfg4;
  cfg4.alpha_pinned_one = true;
  const ModelConfig mc4 = model_config_from(cfg4, 6, 2);
  CHECK(mc4.alpha_pinned);
  CHECK(mc4.has_state);

  TrainConfig bad;
  bad.rho_zero = true;
  bad.lambda_zero = true;
  CHECK_THROWS_AS(apply_ablation(bad), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// phase isolation
// ---------------------------------------------------------------------------

TEST_CASE("pretraining with zero epochs changes nothing") {
  const DatasetBundle data = toy_data();
  TrainConfig cfg = quick_config();
  cfg.pretrain_epochs = 0;
  RedcliffModel model = build_model(cfg, data);
  const BatchData train = make_training_matrices(data.train, cfg.tau_in, cfg.embed_lag - cfg.tau_in);
  const BatchData val = make_training_matrices(data.val, cfg.tau_in, cfg.embed_lag - cfg.tau_in);
  const std::uint32_t before = params_checksum(model.all_params());
  pretrain_state(model, train, val, cfg);
  CHECK(params_checksum(model.all_params()) == before);
}

TEST_CASE("pretraining leaves factor parameters bit-unchanged and learns labels") {
  const DatasetBundle data = toy_data();
  const TrainConfig cfg = quick_config();
  RedcliffModel model = build_model(cfg, data);
  const BatchData train = make_training_matrices(data.train, cfg.tau_in, cfg.embed_lag - cfg.tau_in);
  const BatchData val = make_training_matrices(data.val, cfg.tau_in, cfg.embed_lag - cfg.tau_in);

  const std::uint32_t factors_before = params_checksum(model.factor_params());
  const std::uint32_t state_before = params_checksum(model.state_params());
  const auto history = pretrain_state(model, train, val, cfg);
  CHECK(params_checksum(model.factor_params()) == factors_before);
  CHECK(params_checksum(model.state_params()) != state_before);
  REQUIRE(history.size() == static_cast<std::size_t>(cfg.pretrain_epochs));
  CHECK(history.back().label_mse < history.front().label_mse);
}

TEST_CASE("acclimation leaves state parameters bit-unchanged and improves forecasts") {
  const DatasetBundle data = toy_data();
  const TrainConfig cfg = quick_config();
  RedcliffModel model = build_model(cfg, data);
  const BatchData train = make_training_matrices(data.train, cfg.tau_in, cfg.embed_lag - cfg.tau_in);
  const BatchData val = make_training_matrices(data.val, cfg.tau_in, cfg.embed_lag - cfg.tau_in);

  pretrain_state(model, train, val, cfg);
  const std::uint32_t state_before = params_checksum(model.state_params());
  const std::uint32_t factors_before = params_checksum(model.factor_params());
  const auto history = acclimate_factors(model, train, val, cfg);
  CHECK(params_checksum(model.state_params()) == state_before);
  CHECK(params_checksum(model.factor_params()) != factors_before);
  REQUIRE(!history.empty());
  CHECK(history.back().forecast_mse < history.front().forecast_mse);
}

TEST_CASE("acclimation with zero epochs changes nothing") {
  const DatasetBundle data = toy_data();
  TrainConfig cfg = quick_config();
  cfg.acclimation_epochs = 0;
  RedcliffModel model = build_model(cfg, data);
  const BatchData train = make_training_matrices(data.train, cfg.tau_in, cfg.embed_lag - cfg.tau_in);
  const BatchData val = make_training_matrices(data.val, cfg.tau_in, cfg.embed_lag - cfg.tau_in);
  const std::uint32_t before = params_checksum(model.all_params());
  acclimate_factors(model, train, val, cfg);
  CHECK(params_checksum(model.all_params()) == before);
}

// ---------------------------------------------------------------------------
// joint phase
// ---------------------------------------------------------------------------

TEST_CASE("null objective moves parameters only via weight decay") {
  const DatasetBundle data = toy_data();
  TrainConfig cfg = quick_config();
  cfg.eta = 0.0;
  cfg.omega = 0.0;
  cfg.rho = 0.0;
  cfg.gamma = 0.0;
  cfg.lambda = 0.0;
  cfg.pretrain_epochs = 0;
  cfg.acclimation_epochs = 0;
  cfg.max_iter = 3;
  const BatchData train = make_training_matrices(data.train, cfg.tau_in, cfg.embed_lag - cfg.tau_in);
  const BatchData val = make_training_matrices(data.val, cfg.tau_in, cfg.embed_lag - cfg.tau_in);

  SUBCASE("zero weight decay freezes everything") {
    TrainConfig frozen = cfg;
    frozen.weight_decay = 0.0;
    RedcliffModel model = build_model(frozen, data);
    const std::uint32_t before = params_checksum(model.all_params());
    const JointResult res = joint_train(model, train, val, frozen);
    CHECK(params_checksum(model.all_params()) == before);
    for (const auto& r : res.records) CHECK(r.criterion_value == res.records[0].criterion_value);
  }
  SUBCASE("with weight decay parameters shrink") {
    RedcliffModel model = build_model(cfg, data);
    const std::uint32_t before = params_checksum(model.all_params());
    joint_train(model, train, val, cfg);
    CHECK(params_checksum(model.all_params()) != before);
  }
}

TEST_CASE("joint training is deterministic and selects the criterion minimum") {
  const DatasetBundle data = toy_data();
  TrainConfig cfg = quick_config(3);
  cfg.max_iter = 6;

  auto run = [&] {
    RedcliffModel model = build_model(cfg, data);
    const BatchData train =
        make_training_matrices(data.train, cfg.tau_in, cfg.embed_lag - cfg.tau_in);
    const BatchData val = make_training_matrices(data.val, cfg.tau_in, cfg.embed_lag - cfg.tau_in);
    pretrain_state(model, train, val, cfg);
    acclimate_factors(model, train, val, cfg);
    JointResult res = joint_train(model, train, val, cfg);
    return std::make_pair(params_checksum(model.all_params()), res);
  };
  const auto [sum_a, res_a] = run();
  const auto [sum_b, res_b] = run();
  CHECK(sum_a == sum_b);
  REQUIRE(res_a.records.size() == res_b.records.size());
  for (std::size_t i = 0; i < res_a.records.size(); ++i)
    CHECK(res_a.records[i].criterion_value == res_b.records[i].criterion_value);

  const std::size_t best = select_checkpoint(res_a.records);
  CHECK(res_a.records[best].criterion_value <= res_a.records.back().criterion_value);
  for (const auto& r : res_a.records)
    CHECK(res_a.records[best].criterion_value <= r.criterion_value);
}

TEST_CASE("criterion recombines from its stored components") {
  const DatasetBundle data = toy_data();
  TrainConfig cfg = quick_config(4);
  cfg.max_iter = 4;
  RedcliffModel model = build_model(cfg, data);
  const BatchData train = make_training_matrices(data.train, cfg.tau_in, cfg.embed_lag - cfg.tau_in);
  const BatchData val = make_training_matrices(data.val, cfg.tau_in, cfg.embed_lag - cfg.tau_in);
  const JointResult res = joint_train(model, train, val, cfg);
  const LossCoefficients c = resolve_coefficients(cfg, model.cfg.n_c, model.cfg.n_k);
  for (const auto& r : res.records) {
    const double recombined =
        c.omega * r.components.forecast + c.lambda * r.components.label + c.rho * r.components.cos_sim;
    CHECK(std::abs(recombined - r.criterion_value) <= 1e-12);
  }
}

TEST_CASE("divergent training aborts with a diagnostic") {
  const DatasetBundle data = toy_data();
  TrainConfig cfg = quick_config(5);
  cfg.pretrain_epochs = 0;
  cfg.acclimation_epochs = 0;
  cfg.max_iter = 50;
  cfg.gen_lr = 1e160;  // one step overflows the next forward pass
  cfg.embed_lr = 1e160;
  RedcliffModel model = build_model(cfg, data);
  const BatchData train = make_training_matrices(data.train, cfg.tau_in, cfg.embed_lag - cfg.tau_in);
  const BatchData val = make_training_matrices(data.val, cfg.tau_in, cfg.embed_lag - cfg.tau_in);
  CHECK_THROWS_AS(joint_train(model, train, val, cfg), DivergenceError);
}

// ---------------------------------------------------------------------------
// stopping criterion
// ---------------------------------------------------------------------------

TEST_CASE("single factor models have no similarity component") {
  const DatasetBundle data = toy_data();
  TrainConfig cfg = quick_config(6);
  cfg.single_factor = true;
  RedcliffModel model = build_model(cfg, data);
  const BatchData val = make_training_matrices(data.val, cfg.tau_in, cfg.embed_lag - cfg.tau_in);
  const CriterionComponents c = stopping_criterion(model, val, apply_ablation(cfg));
  CHECK(c.cos_sim == 0.0);
  CHECK(c.label == 0.0);
  CHECK(c.forecast > 0.0);
}

TEST_CASE("perfect forecasts, labels and orthogonal graphs give zero criterion") {
  // Hand-built setting: all-zero signal so zero forecasts are perfect, label
  // head biased to the constant label, and disjoint first-layer supports.
  WindowedDataset ds;
  ds.n_c = 2;
  ds.B = 2;
  ds.t_window = 12;
  for (int i = 0; i < 4; ++i) {
    Window w;
    w.x = Eigen::MatrixXd::Zero(2, 12);
    w.y = (Eigen::VectorXd(2) << 1.0, 0.0).finished();
    ds.samples.push_back(w);
  }
  TrainConfig cfg = quick_config(7);
  cfg.tau_in = 2;
  cfg.embed_lag = 4;
  ModelConfig mc = model_config_from(cfg, 2, 2);
  Rng rng(1);
  RedcliffModel model = RedcliffModel::make(mc, rng);
  for (auto& p : model.all_params()) p.data().setZero();
  model.state->alpha_scale.data().setConstant(1.0);
  model.state->y_scale.data().setConstant(1.0);
  model.state->y_bias.data() << 1.0, 0.0;  // y_hat == labels for every sample
  // Orthogonal supports: factor 0 reads channel 0, factor 1 reads channel 1.
  model.factors[0].nodes[0].first_w.data()[0] = 1.0;
  model.factors[1].nodes[1].first_w.data()[1] = 1.0;

  const BatchData val = make_training_matrices(ds, cfg.tau_in, cfg.embed_lag - cfg.tau_in);
  const CriterionComponents c = stopping_criterion(model, val, cfg);
  CHECK(c.forecast == 0.0);
  CHECK(c.label == 0.0);
  CHECK(std::abs(c.cos_sim) <= 1e-15);
  const LossCoefficients coeff = resolve_coefficients(cfg, 2, 2);
  CHECK(criterion_value(c, coeff) == 0.0);
}

TEST_CASE("criterion components recompute independently") {
  const DatasetBundle data = toy_data();
  TrainConfig cfg = quick_config(8);
  RedcliffModel model = build_model(cfg, data);
  const BatchData val = make_training_matrices(data.val, cfg.tau_in, cfg.embed_lag - cfg.tau_in);
  const CriterionComponents c = stopping_criterion(model, val, cfg);

  // Independent recomputation.
  Tensor xs = Tensor::from_matrix(val.x_state);
  Tensor xf = Tensor::from_matrix(val.x_fact);
  const auto fwd = model.forward(xs, xf);
  const double forecast = oracle::loop_mse(fwd.x_hat.data(), Tensor::from_matrix(val.target).data());
  const double label = oracle::loop_mse(fwd.y_hat.data(), Tensor::from_matrix(val.labels).data());
  CHECK(std::abs(c.forecast - forecast) <= 1e-12);
  CHECK(std::abs(c.label - label) <= 1e-12);

  auto tilde = model.adjacency_estimates();
  for (auto& m : tilde) m /= m.maxCoeff();
  double cos = 0.0;
  for (std::size_t p = 0; p < tilde.size(); ++p)
    for (std::size_t q = p + 1; q < tilde.size(); ++q)
      cos += tilde[p].cwiseProduct(tilde[q]).sum() / (tilde[p].norm() * tilde[q].norm());
  CHECK(std::abs(c.cos_sim - cos) <= 1e-12);
}

TEST_CASE("the sixty-fold selection variant scales only the cosine component") {
  const DatasetBundle data = toy_data();
  TrainConfig cfg = quick_config(9);
  RedcliffModel model = build_model(cfg, data);
  const BatchData val = make_training_matrices(data.val, cfg.tau_in, cfg.embed_lag - cfg.tau_in);
  const CriterionComponents base = stopping_criterion(model, val, cfg);
  cfg.criterion_cos_multiplier = 60.0;
  const CriterionComponents scaled = stopping_criterion(model, val, cfg);
  CHECK(scaled.cos_sim == doctest::Approx(60.0 * base.cos_sim).epsilon(1e-12));
  CHECK(scaled.forecast == base.forecast);
  CHECK(scaled.label == base.label);
}

// ---------------------------------------------------------------------------
// run_training end-to-end + checkpoints
// ---------------------------------------------------------------------------

TEST_CASE("full training writes history and retained checkpoints") {
  const DatasetBundle data = toy_data();
  TrainConfig cfg = quick_config(10);
  cfg.max_iter = 5;
  const fs::path dir = temp_dir("run");
  RedcliffModel model = build_model(cfg, data);
  const TrainOutcome out = run_training(model, data, cfg, dir);

  CHECK(fs::exists(dir / "history.csv"));
  CHECK(fs::exists(dir / "checkpoint_best" / "model.json"));
  CHECK(fs::exists(dir / "checkpoint_final" / "weights.bin"));
  CHECK(out.records.size() == 5);
  CHECK(out.history.size() == static_cast<std::size_t>(8 + 6 + 5));

  const std::string csv = read_text_file(dir / "history.csv");
  CHECK(csv.find("phase,epoch,train_loss") == 0);
  CHECK(csv.find("pretrain") != std::string::npos);
  CHECK(csv.find("acclimation") != std::string::npos);
  CHECK(csv.find("joint") != std::string::npos);

  SUBCASE("final checkpoint reloads with identical parameters") {
    const RedcliffModel loaded = load_checkpoint(dir / "checkpoint_final");
    CHECK(params_checksum(loaded.all_params()) == params_checksum(model.all_params()));
    CHECK(loaded.cfg.n_k == model.cfg.n_k);
    CHECK(loaded.cfg.tau_cl == model.cfg.tau_cl);
  }
  SUBCASE("corrupted weights fail the checksum") {
    std::fstream f(dir / "checkpoint_final" / "weights.bin",
                   std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(11);
    f.put('\x42');
    f.close();
    CHECK_THROWS_WITH_AS(static_cast<void>(load_checkpoint(dir / "checkpoint_final")),
                         doctest::Contains("checksum failure"), std::runtime_error);
  }
}

TEST_CASE("training a single-factor ablation runs the bare pipeline") {
  const DatasetBundle data = toy_data();
  TrainConfig cfg = quick_config(11);
  cfg.single_factor = true;
  cfg.max_iter = 4;
  RedcliffModel model = build_model(cfg, data);
  CHECK(!model.state.has_value());
  const TrainOutcome out = run_training(model, data, cfg, {});
  CHECK(out.records.size() == 4);
  // No pretrain epochs recorded: there is no state model to pretrain.
  for (const auto& h : out.history) CHECK(h.phase != "pretrain");
}

TEST_CASE("empty training data is rejected") {
  const DatasetBundle data = toy_data();
  TrainConfig cfg = quick_config(12);
  RedcliffModel model = build_model(cfg, data);
  BatchData empty;
  empty.x_state.resize(0, 3 * 8);
  empty.x_fact.resize(0, 3 * 2);
  empty.target.resize(0, 3);
  empty.labels.resize(0, 2);
  const BatchData val = make_training_matrices(data.val, cfg.tau_in, cfg.embed_lag - cfg.tau_in);
  CHECK_THROWS_AS(pretrain_state(model, empty, val, cfg), std::invalid_argument);
  CHECK_THROWS_AS(acclimate_factors(model, empty, val, cfg), std::invalid_argument);
  CHECK_THROWS_AS(joint_train(model, empty, val, cfg), std::invalid_argument);
}
