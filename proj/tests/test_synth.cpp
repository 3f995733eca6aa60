#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <set>

#include <Eigen/Eigenvalues>

#include "oracles.hpp"
#include "redcliff/dataset.hpp"
#include "redcliff/io.hpp"
#include "redcliff/synth.hpp"

using namespace redcliff;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("redcliff_synth_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Single-factor system with a hand-set adjacency, zero drive and innovations.
VarFactorSpec quiet_factor(Index n_c, Index tau) {
  VarFactorSpec f;
  f.adjacency.assign(static_cast<std::size_t>(tau), Eigen::MatrixXd::Zero(n_c, n_c));
  f.activation.assign(static_cast<std::size_t>(tau),
                      Eigen::MatrixXi::Constant(n_c, n_c, static_cast<int>(EdgeActivation::linear)));
  f.amp = Eigen::VectorXd::Zero(n_c);
  f.innov_mu = Eigen::VectorXd::Zero(n_c);
  f.innov_var = Eigen::VectorXd::Zero(n_c);
  f.base_freq = Eigen::VectorXd::Zero(n_c);
  return f;
}

}  // namespace

// ---------------------------------------------------------------------------
// complexity_rating
// ---------------------------------------------------------------------------

TEST_CASE("complexity ratings reproduce the published categories") {
  const auto low = complexity_rating(12, 33);
  CHECK(low.value == 4.0);
  CHECK(low.category == ComplexityCategory::Low);

  const auto moderate = complexity_rating(12, 11);
  CHECK(moderate.value == 12.0);
  CHECK(moderate.category == ComplexityCategory::Moderate);

  const auto high = complexity_rating(6, 2);
  CHECK(high.value == 15.0);
  CHECK(high.category == ComplexityCategory::High);

  CHECK(to_string(high.category) == "High");
  CHECK_THROWS_AS(complexity_rating(6, 0), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// build_system
// ---------------------------------------------------------------------------

TEST_CASE("build_system places self-connections and the requested edges") {
  Rng rng(1);
  const SystemSpec spec = build_system(12, 33, 3, rng);
  CHECK(spec.n_k() == 3);
  for (const auto& f : spec.factors) {
    for (Index i = 0; i < 12; ++i) CHECK(f.adjacency[0](i, i) != 0.0);
    std::set<std::pair<Index, Index>> edges;
    for (Index i = 0; i < 12; ++i)
      for (Index j = 0; j < 12; ++j) {
        if (i == j) continue;
        bool any = false;
        for (const auto& a : f.adjacency) any = any || a(i, j) != 0.0;
        if (any) edges.insert({i, j});
      }
    CHECK(edges.size() == 33);
  }
}

TEST_CASE("build_system with zero edges keeps only the diagonal") {
  Rng rng(2);
  const SystemSpec spec = build_system(4, 0, 2, rng);
  for (const auto& f : spec.factors) {
    Eigen::MatrixXd offdiag = f.lag_abs_sum();
    offdiag.diagonal().setZero();
    CHECK(offdiag.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("build_system caps the collapsed spectral radius") {
  Rng rng(3);
  const SystemSpec spec = build_system(6, 20, 2, rng);
  for (const auto& f : spec.factors) {
    Eigen::EigenSolver<Eigen::MatrixXd> solver(f.lag_abs_sum(), false);
    CHECK(solver.eigenvalues().array().abs().maxCoeff() <= 0.95 + 1e-9);
  }
}

TEST_CASE("build_system validates n_e range") {
  Rng rng(4);
  CHECK_THROWS_AS(build_system(3, 7, 1, rng), std::invalid_argument);
  CHECK_THROWS_AS(build_system(3, -1, 1, rng), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// simulate_factor
// ---------------------------------------------------------------------------

TEST_CASE("identity adjacency with no drive holds the initial state") {
  VarFactorSpec f = quiet_factor(3, 2);
  f.adjacency[0] = Eigen::MatrixXd::Identity(3, 3);
  Rng rng(5);
  Eigen::VectorXd init(3);
  init << 0.3, -0.7, 1.1;
  const Eigen::MatrixXd x = simulate_factor(f, 10, 5, init, rng);
  for (Index t = 0; t < 10; ++t)
    for (Index i = 0; i < 3; ++i) CHECK(x(i, t) == doctest::Approx(init[i]).epsilon(1e-14));
}

TEST_CASE("two-node chain matches a hand-unrolled recurrence") {
  // x_A[t] = 0.5 x_A[t-1];  x_B[t] = 0.8 x_B[t-1] + 0.25 x_A[t-1]
  VarFactorSpec f = quiet_factor(2, 2);
  f.adjacency[0](0, 0) = 0.5;
  f.adjacency[0](1, 1) = 0.8;
  f.adjacency[0](1, 0) = 0.25;
  Rng rng(6);
  Eigen::VectorXd init(2);
  init << 1.0, -2.0;
  const Eigen::MatrixXd x = simulate_factor(f, 5, 0, init, rng);

  double xa = 1.0, xb = -2.0;
  for (Index t = 0; t < 5; ++t) {
    const double na = 0.5 * xa;
    const double nb = 0.8 * xb + 0.25 * xa;
    CHECK(x(0, t) == doctest::Approx(na).epsilon(1e-14));
    CHECK(x(1, t) == doctest::Approx(nb).epsilon(1e-14));
    xa = na;
    xb = nb;
  }
}

TEST_CASE("all-linear simulation agrees with a dense VAR oracle") {
  Rng build_rng(7);
  SystemGenParams params;
  params.innovations_var = 0.0;
  SystemSpec spec = build_system(5, 8, 1, build_rng, params);
  auto& f = spec.factors[0];
  for (auto& act : f.activation)
    act.setConstant(static_cast<int>(EdgeActivation::linear));

  Eigen::VectorXd init(5);
  init << 0.2, -0.4, 0.9, -0.1, 0.5;
  Rng sim_rng(8);
  const Eigen::MatrixXd ours = simulate_factor(f, 40, 12, init, sim_rng);
  const Eigen::MatrixXd oracle_x =
      oracle::dense_linear_var(f.adjacency, f.amp, f.base_freq, init, 12, 40);
  CHECK((ours - oracle_x).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("nrelu edges respond to negative swings with their magnitude") {
  VarFactorSpec f = quiet_factor(2, 1);
  f.adjacency[0](0, 0) = 0.5;
  f.adjacency[0](1, 0) = 1.0;
  f.activation[0](1, 0) = static_cast<int>(EdgeActivation::nrelu);
  Rng rng(9);
  Eigen::VectorXd init(2);
  init << -1.0, 0.0;
  const Eigen::MatrixXd x = simulate_factor(f, 1, 0, init, rng);
  CHECK(x(0, 0) == doctest::Approx(-0.5).epsilon(1e-14));
  CHECK(x(1, 0) == doctest::Approx(1.0).epsilon(1e-14));  // nrelu(-1) = 1
}

// ---------------------------------------------------------------------------
// trajectory and mixing
// ---------------------------------------------------------------------------

TEST_CASE("trajectories stay in [0,1] and are linear between knots") {
  Rng rng(10);
  const WeightTrajectory traj = make_trajectory(3, 450, 100, rng);
  CHECK(traj.weights.rows() == 3);
  CHECK(traj.weights.cols() == 450);
  CHECK(traj.weights.minCoeff() >= 0.0);
  CHECK(traj.weights.maxCoeff() <= 1.0);
  // Second difference vanishes strictly inside each 100-step segment.
  for (Index k = 0; k < 3; ++k)
    for (Index t = 1; t < 449; ++t) {
      if (t % 100 == 0 || (t + 1) % 100 == 0) continue;
      const double second_diff =
          traj.weights(k, t + 1) - 2.0 * traj.weights(k, t) + traj.weights(k, t - 1);
      CHECK(std::abs(second_diff) <= 1e-9);
    }
}

TEST_CASE("constant selector trajectory reproduces one factor recording") {
  std::vector<Eigen::MatrixXd> recs = {Eigen::MatrixXd::Random(4, 50),
                                       Eigen::MatrixXd::Random(4, 50)};
  WeightTrajectory traj;
  traj.weights = Eigen::MatrixXd::Zero(2, 50);
  traj.weights.row(0).setOnes();
  Rng noise(12);
  const Eigen::MatrixXd mixed = mix_recordings(recs, traj, 0.0, noise);
  CHECK((mixed - recs[0]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("labels depend on the trajectory, never on the mixing noise") {
  Rng rng(13);
  const SystemSpec spec = build_system(4, 3, 2, rng);
  std::vector<Eigen::MatrixXd> recs;
  for (Index k = 0; k < 2; ++k) {
    Rng stream = Rng(77).fork(static_cast<std::uint64_t>(k));
    Eigen::VectorXd init(4);
    for (Index i = 0; i < 4; ++i) init[i] = stream.uniform(-1.0, 1.0);
    recs.push_back(simulate_factor(spec.factors[static_cast<std::size_t>(k)], 400, spec.burn_in,
                                   init, stream));
  }
  Rng traj_rng(88);
  const WeightTrajectory traj = make_trajectory(2, 400, 100, traj_rng);
  Rng noise_a(1001), noise_b(2002);
  const Eigen::MatrixXd mix_a = mix_recordings(recs, traj, 0.5, noise_a);
  const Eigen::MatrixXd mix_b = mix_recordings(recs, traj, 0.5, noise_b);
  CHECK((mix_a - mix_b).cwiseAbs().maxCoeff() > 0.0);

  const WindowedDataset a = label_windows(mix_a, traj, 100, 50);
  const WindowedDataset b = label_windows(mix_b, traj, 100, 50);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i)
    CHECK((a.samples[i].y - b.samples[i].y).cwiseAbs().maxCoeff() == 0.0);
}

// ---------------------------------------------------------------------------
// label_windows
// ---------------------------------------------------------------------------

TEST_CASE("constant trajectory labels every window the same") {
  WeightTrajectory traj;
  traj.weights = Eigen::MatrixXd(2, 300);
  traj.weights.row(0).setConstant(0.9);
  traj.weights.row(1).setConstant(0.1);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 300);
  const WindowedDataset ds = label_windows(x, traj, 100, 100);
  CHECK(ds.samples.size() == 3);
  for (const auto& w : ds.samples) {
    CHECK(w.y[0] == 1.0);
    CHECK(w.y[1] == 0.0);
  }
}

TEST_CASE("labels switch exactly where the trajectory argmax crosses") {
  WeightTrajectory traj;
  traj.weights = Eigen::MatrixXd(2, 200);
  for (Index t = 0; t < 200; ++t) {
    traj.weights(0, t) = 1.0 - static_cast<double>(t) / 199.0;
    traj.weights(1, t) = static_cast<double>(t) / 199.0;
  }
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(2, 200);
  const WindowedDataset ds = label_windows(x, traj, 20, 10);

  // Direct argmax scan over each window's final step.
  std::size_t idx = 0;
  for (Index start = 0; start + 20 <= 200; start += 10, ++idx) {
    const Index end = start + 19;
    const Index expect = traj.weights(0, end) >= traj.weights(1, end) ? 0 : 1;
    CHECK(ds.samples[idx].y[expect] == 1.0);
  }
}

TEST_CASE("exact argmax ties go to the lowest factor index") {
  WeightTrajectory traj;
  traj.weights = Eigen::MatrixXd::Constant(2, 50, 0.5);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, 50);
  const WindowedDataset ds = label_windows(x, traj, 50, 50);
  REQUIRE(ds.samples.size() == 1);
  CHECK(ds.samples[0].y[0] == 1.0);
  CHECK(ds.samples[0].y[1] == 0.0);
}

TEST_CASE("window length beyond the recording is rejected") {
  WeightTrajectory traj;
  traj.weights = Eigen::MatrixXd::Constant(1, 10, 1.0);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, 10);
  CHECK_THROWS_AS(label_windows(x, traj, 11, 1), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// combine_folds
// ---------------------------------------------------------------------------

TEST_CASE("combine_folds basics") {
  std::vector<Eigen::MatrixXd> recs = {Eigen::MatrixXd::Random(3, 20),
                                       Eigen::MatrixXd::Random(3, 20),
                                       Eigen::MatrixXd::Random(3, 20)};
  SUBCASE("zero background keeps only the scaled dominant recording") {
    const Eigen::MatrixXd out = combine_folds(recs, 1, 10.0, 0.0);
    CHECK((out - 10.0 * recs[1]).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("two identical recordings with coefficients (10,1) give 11r") {
    std::vector<Eigen::MatrixXd> twin = {recs[0], recs[0]};
    const Eigen::MatrixXd out = combine_folds(twin, 0, 10.0, 1.0);
    CHECK((out - 11.0 * recs[0]).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("random three-fold input matches the loop oracle") {
    const Eigen::MatrixXd out = combine_folds(recs, 2, 10.0, 0.1);
    for (Index i = 0; i < 3; ++i)
      for (Index t = 0; t < 20; ++t) {
        const double expect = 10.0 * recs[2](i, t) + 0.1 * (recs[0](i, t) + recs[1](i, t));
        CHECK(out(i, t) == doctest::Approx(expect).epsilon(1e-12));
      }
  }
  SUBCASE("linearity in the recordings") {
    std::vector<Eigen::MatrixXd> scaled;
    for (const auto& r : recs) scaled.push_back(3.0 * r);
    const Eigen::MatrixXd a = combine_folds(scaled, 0, 10.0, 0.1);
    const Eigen::MatrixXd b = 3.0 * combine_folds(recs, 0, 10.0, 0.1);
    CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-10);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(combine_folds(recs, 5, 10.0, 0.1), std::invalid_argument);
    std::vector<Eigen::MatrixXd> bad = {recs[0], Eigen::MatrixXd::Zero(2, 20)};
    CHECK_THROWS_AS(combine_folds(bad, 0, 10.0, 0.1), std::invalid_argument);
  }
}

// ---------------------------------------------------------------------------
// dataset export/import
// ---------------------------------------------------------------------------

TEST_CASE("dataset round trip is bit identical") {
  GenConfig cfg;
  cfg.n_c = 3;
  cfg.n_e = 2;
  cfg.n_k = 2;
  cfg.train_per_class = 8;
  cfg.val_per_class = 3;
  cfg.seed = 99;
  const GeneratedData data = generate_dataset(cfg);
  const fs::path dir = temp_dir("roundtrip");
  export_dataset(data.train, data.val, "{\"seed\":99}", dir);
  const DatasetBundle loaded = import_dataset(dir);
  REQUIRE(loaded.train.samples.size() == data.train.samples.size());
  REQUIRE(loaded.val.samples.size() == data.val.samples.size());
  for (std::size_t i = 0; i < data.train.samples.size(); ++i) {
    CHECK((loaded.train.samples[i].x - data.train.samples[i].x).cwiseAbs().maxCoeff() == 0.0);
    CHECK((loaded.train.samples[i].y - data.train.samples[i].y).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("truncated data file fails the checksum") {
  GenConfig cfg;
  cfg.n_c = 2;
  cfg.n_e = 1;
  cfg.n_k = 2;
  cfg.train_per_class = 2;
  cfg.val_per_class = 1;
  const GeneratedData data = generate_dataset(cfg);
  const fs::path dir = temp_dir("truncated");
  export_dataset(data.train, data.val, "", dir);
  const auto size = fs::file_size(dir / "train.bin");
  fs::resize_file(dir / "train.bin", size - 5);
  CHECK_THROWS_WITH_AS(static_cast<void>(import_dataset(dir)),
                       doctest::Contains("checksum failure"), std::runtime_error);
}

TEST_CASE("unknown dataset format version is rejected explicitly") {
  GenConfig cfg;
  cfg.n_c = 2;
  cfg.n_e = 1;
  cfg.n_k = 2;
  cfg.train_per_class = 2;
  cfg.val_per_class = 1;
  const GeneratedData data = generate_dataset(cfg);
  const fs::path dir = temp_dir("version");
  export_dataset(data.train, data.val, "", dir);
  auto meta = read_text_file(dir / "meta.json");
  const auto pos = meta.find("\"format_version\": 1");
  REQUIRE(pos != std::string::npos);
  meta.replace(pos, 19, "\"format_version\": 9");
  write_text_file(dir / "meta.json", meta);
  CHECK_THROWS_WITH_AS(static_cast<void>(import_dataset(dir)),
                       doctest::Contains("unsupported dataset format version"),
                       std::runtime_error);
}

// ---------------------------------------------------------------------------
// generate_dataset
// ---------------------------------------------------------------------------

TEST_CASE("per-class quotas are honored and defaults match the sizing table") {
  GenConfig cfg;
  CHECK(cfg.train_per_class == 1040);
  CHECK(cfg.val_per_class == 240);
  CHECK(cfg.t_window == 100);

  cfg.n_c = 3;
  cfg.n_e = 2;
  cfg.n_k = 2;
  cfg.seed = 5;
  cfg.train_per_class = 12;
  cfg.val_per_class = 4;
  const GeneratedData data = generate_dataset(cfg);
  CHECK(data.train.samples.size() == 24);
  CHECK(data.val.samples.size() == 8);

  Index count_class0 = 0;
  for (const auto& w : data.train.samples) {
    CHECK(w.y.sum() == 1.0);
    CHECK((w.y.array() >= 0.0).all());
    if (w.y[0] == 1.0) ++count_class0;
  }
  CHECK(count_class0 == 12);
}

TEST_CASE("generation is deterministic per seed") {
  GenConfig cfg;
  cfg.n_c = 3;
  cfg.n_e = 2;
  cfg.n_k = 2;
  cfg.train_per_class = 5;
  cfg.val_per_class = 2;
  cfg.seed = 31337;
  const GeneratedData a = generate_dataset(cfg);
  const GeneratedData b = generate_dataset(cfg);
  CHECK(system_to_json(a.spec) == system_to_json(b.spec));
  for (std::size_t i = 0; i < a.train.samples.size(); ++i)
    CHECK((a.train.samples[i].x - b.train.samples[i].x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("system json round trip preserves the spec") {
  Rng rng(17);
  SystemGenParams params;
  params.innovations_var = 0.5;
  const SystemSpec spec = build_system(4, 5, 2, rng, params);
  const SystemSpec loaded = system_from_json(system_to_json(spec));
  CHECK(loaded.n_c == spec.n_c);
  CHECK(loaded.n_e == spec.n_e);
  REQUIRE(loaded.n_k() == spec.n_k());
  for (Index k = 0; k < spec.n_k(); ++k) {
    const auto& a = spec.factors[static_cast<std::size_t>(k)];
    const auto& b = loaded.factors[static_cast<std::size_t>(k)];
    for (Index l = 0; l < a.tau(); ++l) {
      CHECK((a.adjacency[static_cast<std::size_t>(l)] - b.adjacency[static_cast<std::size_t>(l)])
                .cwiseAbs()
                .maxCoeff() == 0.0);
      CHECK(a.activation[static_cast<std::size_t>(l)] == b.activation[static_cast<std::size_t>(l)]);
    }
    CHECK((a.innov_var - b.innov_var).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.base_freq - b.base_freq).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("recording container round trips and rejects corruption") {
  const fs::path dir = temp_dir("recording");
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 33);
  save_recording(dir / "r.bin", x);
  const Eigen::MatrixXd back = load_recording(dir / "r.bin");
  CHECK((x - back).cwiseAbs().maxCoeff() == 0.0);

  std::fstream f(dir / "r.bin", std::ios::binary | std::ios::in | std::ios::out);
  f.seekp(30);
  f.put('\x7f');
  f.close();
  CHECK_THROWS_WITH_AS(static_cast<void>(load_recording(dir / "r.bin")),
                       doctest::Contains("checksum failure"), std::runtime_error);
}
