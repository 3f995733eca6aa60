#include "redcliff/synth.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "json.hpp"

#include "redcliff/ops.hpp"

namespace redcliff {

namespace {

using ordered_json = nlohmann::ordered_json;

double apply_activation(EdgeActivation act, double x) {
  switch (act) {
    case EdgeActivation::linear: return x;
    case EdgeActivation::relu: return relu(x);
    case EdgeActivation::nrelu: return nrelu(x);
  }
  throw std::logic_error("unknown edge activation");
}

double spectral_radius(const Eigen::MatrixXd& m) {
  Eigen::EigenSolver<Eigen::MatrixXd> solver(m, /*computeEigenvectors=*/false);
  return solver.eigenvalues().array().abs().maxCoeff();
}

}  // namespace

Eigen::MatrixXd VarFactorSpec::lag_abs_sum() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n_c(), n_c());
  for (const auto& a : adjacency) m += a.cwiseAbs();
  return m;
}

Eigen::VectorXd default_base_frequencies(Index n_c) {
  Eigen::VectorXd f(n_c);
  for (Index i = 0; i < n_c; ++i)
    f[i] = std::numbers::pi * static_cast<double>(i * 707 + i % 2) / 120000.0;
  return f;
}

SystemSpec build_system(Index n_c, Index n_e, Index n_k, Rng& rng, const SystemGenParams& params) {
  if (n_c < 1) throw std::invalid_argument("build_system: n_c must be >= 1");
  if (n_k < 1) throw std::invalid_argument("build_system: n_k must be >= 1");
  const Index max_edges = n_c * n_c - n_c;
  if (n_e < 0 || n_e > max_edges)
    throw std::invalid_argument("build_system: n_e out of range [0, n_c^2 - n_c]");
  if (params.tau < 1) throw std::invalid_argument("build_system: tau must be >= 1");

  SystemSpec spec;
  spec.n_c = n_c;
  spec.n_e = n_e;
  spec.mix_noise_std = params.mix_noise_std;
  spec.burn_in = params.burn_in;

  for (Index k = 0; k < n_k; ++k) {
    VarFactorSpec f;
    f.adjacency.assign(params.tau, Eigen::MatrixXd::Zero(n_c, n_c));
    f.activation.assign(params.tau,
                        Eigen::MatrixXi::Constant(n_c, n_c, static_cast<int>(EdgeActivation::linear)));
    f.amp = Eigen::VectorXd::Constant(n_c, params.innovations_amp);
    f.innov_mu = Eigen::VectorXd::Constant(n_c, params.innovations_mu);
    f.innov_var = Eigen::VectorXd::Constant(n_c, params.innovations_var);
    f.base_freq = default_base_frequencies(n_c);

    // Self-connections: lag-1 diagonal, linear, clearly nonzero.
    for (Index i = 0; i < n_c; ++i) {
      double w = rng.uniform(-1.0, 1.0);
      while (std::abs(w) < 0.1) w = rng.uniform(-1.0, 1.0);
      f.adjacency[0](i, i) = w;
    }

    // n_e distinct off-diagonal edges via partial Fisher-Yates over all pairs.
    std::vector<std::pair<Index, Index>> pairs;
    pairs.reserve(static_cast<std::size_t>(max_edges));
    for (Index i = 0; i < n_c; ++i)
      for (Index j = 0; j < n_c; ++j)
        if (i != j) pairs.emplace_back(i, j);
    for (Index e = 0; e < n_e; ++e) {
      const auto pick = e + static_cast<Index>(rng.uniform_index(
                                static_cast<std::uint64_t>(max_edges - e)));
      std::swap(pairs[static_cast<std::size_t>(e)], pairs[static_cast<std::size_t>(pick)]);
      const auto [i, j] = pairs[static_cast<std::size_t>(e)];
      for (Index l = 0; l < params.tau; ++l) {
        f.adjacency[l](i, j) = rng.uniform(-1.0, 1.0);
        f.activation[l](i, j) = static_cast<int>(rng.uniform_index(3));
      }
    }

    const double radius = spectral_radius(f.lag_abs_sum());
    if (radius > params.spectral_cap) {
      const double s = params.spectral_cap / radius;
      for (auto& a : f.adjacency) a *= s;
    }
    spec.factors.push_back(std::move(f));
  }
  return spec;
}

Eigen::MatrixXd simulate_factor(const VarFactorSpec& factor, Index t, Index burn_in,
                                const Eigen::VectorXd& init, Rng& rng) {
  const Index n_c = factor.n_c();
  const Index tau = factor.tau();
  if (t < 1) throw std::invalid_argument("simulate_factor: t must be >= 1");
  if (init.size() != n_c) throw std::invalid_argument("simulate_factor: init length != n_c");

  // history.col(0) is the newest past state.
  Eigen::MatrixXd history = init.replicate(1, tau);
  Eigen::MatrixXd out(n_c, t);
  Eigen::VectorXd next(n_c);
  for (Index step = 0; step < burn_in + t; ++step) {
    for (Index i = 0; i < n_c; ++i) {
      double acc = 0.0;
      for (Index l = 0; l < tau; ++l) {
        const auto& a = factor.adjacency[static_cast<std::size_t>(l)];
        const auto& act = factor.activation[static_cast<std::size_t>(l)];
        for (Index j = 0; j < n_c; ++j) {
          const double w = a(i, j);
          if (w != 0.0)
            acc += w * apply_activation(static_cast<EdgeActivation>(act(i, j)), history(j, l));
        }
      }
      acc += factor.amp[i] * std::sin(factor.base_freq[i] * static_cast<double>(step));
      const double u = rng.uniform();
      const double g = rng.gaussian(factor.innov_mu[i], std::sqrt(factor.innov_var[i]));
      next[i] = acc + factor.amp[i] * u * g;
    }
    for (Index l = tau - 1; l > 0; --l) history.col(l) = history.col(l - 1);
    history.col(0) = next;
    if (step >= burn_in) out.col(step - burn_in) = next;
  }
  return out;
}

WeightTrajectory make_trajectory(Index n_k, Index t, Index knot_spacing, Rng& rng) {
  if (t < 1) throw std::invalid_argument("make_trajectory: t must be >= 1");
  if (knot_spacing < 1) throw std::invalid_argument("make_trajectory: knot_spacing must be >= 1");
  const Index segments = (t - 1 + knot_spacing - 1) / knot_spacing;
  const Index knots = segments + 1;
  Eigen::MatrixXd knot_vals(n_k, knots);
  for (Index m = 0; m < knots; ++m)
    for (Index k = 0; k < n_k; ++k) knot_vals(k, m) = rng.uniform();

  WeightTrajectory traj;
  traj.weights.resize(n_k, t);
  for (Index step = 0; step < t; ++step) {
    const Index m = step / knot_spacing;
    const double frac = static_cast<double>(step - m * knot_spacing) / static_cast<double>(knot_spacing);
    traj.weights.col(step) =
        (1.0 - frac) * knot_vals.col(m) + frac * knot_vals.col(std::min(m + 1, knots - 1));
  }
  return traj;
}

Eigen::MatrixXd mix_recordings(const std::vector<Eigen::MatrixXd>& recordings,
                               const WeightTrajectory& trajectory, double noise_std, Rng& rng) {
  if (recordings.empty()) throw std::invalid_argument("mix_recordings: no recordings");
  if (noise_std < 0.0) throw std::invalid_argument("mix_recordings: negative noise std");
  const Index n_c = recordings[0].rows();
  const Index t = recordings[0].cols();
  const auto n_k = static_cast<Index>(recordings.size());
  for (const auto& r : recordings)
    if (r.rows() != n_c || r.cols() != t)
      throw std::invalid_argument("mix_recordings: recording shape mismatch");
  if (trajectory.weights.rows() != n_k || trajectory.weights.cols() != t)
    throw std::invalid_argument("mix_recordings: trajectory shape mismatch");

  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n_c, t);
  for (Index k = 0; k < n_k; ++k)
    x.array() += recordings[static_cast<std::size_t>(k)].array().rowwise() *
                 trajectory.weights.row(k).array();
  for (Index step = 0; step < t; ++step)
    for (Index i = 0; i < n_c; ++i) x(i, step) += rng.gaussian(0.0, noise_std);
  return x;
}

Recording simulate_recording(const SystemSpec& spec, Index t, Rng& rng) {
  std::vector<Eigen::MatrixXd> recs;
  recs.reserve(static_cast<std::size_t>(spec.n_k()));
  for (Index k = 0; k < spec.n_k(); ++k) {
    Rng stream = rng.fork(static_cast<std::uint64_t>(k));
    Eigen::VectorXd init(spec.n_c);
    for (Index i = 0; i < spec.n_c; ++i) init[i] = stream.uniform(-1.0, 1.0);
    recs.push_back(simulate_factor(spec.factors[static_cast<std::size_t>(k)], t, spec.burn_in,
                                   init, stream));
  }
  Rng traj_stream = rng.fork(1000);
  Rng noise_stream = rng.fork(2000);
  Recording rec;
  rec.trajectory = make_trajectory(spec.n_k(), t, 100, traj_stream);
  rec.x = mix_recordings(recs, rec.trajectory, spec.mix_noise_std, noise_stream);
  return rec;
}

std::string to_string(ComplexityCategory c) {
  switch (c) {
    case ComplexityCategory::Low: return "Low";
    case ComplexityCategory::Moderate: return "Moderate";
    case ComplexityCategory::High: return "High";
  }
  throw std::logic_error("unknown complexity category");
}

ComplexityRating complexity_rating(Index n_c, Index n_e) {
  if (n_c < 2) throw std::invalid_argument("complexity_rating: n_c must be >= 2");
  const Index max_edges = n_c * n_c - n_c;
  if (n_e <= 0 || n_e > max_edges)
    throw std::invalid_argument("complexity_rating: undefined for n_e outside (0, n_c^2 - n_c]");
  const double value = static_cast<double>(max_edges) / static_cast<double>(n_e);
  ComplexityCategory cat = ComplexityCategory::High;
  if (value <= 7.0)
    cat = ComplexityCategory::Low;
  else if (value <= 13.0)
    cat = ComplexityCategory::Moderate;
  return {value, cat};
}

Eigen::MatrixXd combine_folds(const std::vector<Eigen::MatrixXd>& recordings, Index dominant_index,
                              double dominant_coeff, double background_coeff) {
  if (recordings.empty()) throw std::invalid_argument("combine_folds: no recordings");
  if (dominant_index < 0 || dominant_index >= static_cast<Index>(recordings.size()))
    throw std::invalid_argument("combine_folds: dominant index out of range");
  const Index r = recordings[0].rows(), c = recordings[0].cols();
  for (const auto& rec : recordings)
    if (rec.rows() != r || rec.cols() != c)
      throw std::invalid_argument("combine_folds: recording shape mismatch");
  Eigen::MatrixXd out = dominant_coeff * recordings[static_cast<std::size_t>(dominant_index)];
  for (Index k = 0; k < static_cast<Index>(recordings.size()); ++k)
    if (k != dominant_index) out += background_coeff * recordings[static_cast<std::size_t>(k)];
  return out;
}

namespace {

ordered_json matrix_to_json(const Eigen::MatrixXd& m) {
  ordered_json rows = ordered_json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const ordered_json& j) {
  const auto rows = static_cast<Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index c = 0; c < cols; ++c) m(i, c) = j[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)].get<double>();
  return m;
}

ordered_json vector_to_json(const Eigen::VectorXd& v) {
  ordered_json arr = ordered_json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Eigen::VectorXd vector_from_json(const ordered_json& j) {
  Eigen::VectorXd v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i) v[i] = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

}  // namespace

std::string system_to_json(const SystemSpec& spec) {
  ordered_json j;
  j["format_version"] = 1;
  j["n_c"] = spec.n_c;
  j["n_e"] = spec.n_e;
  j["mix_noise_std"] = spec.mix_noise_std;
  j["burn_in"] = spec.burn_in;
  ordered_json factors = ordered_json::array();
  for (const auto& f : spec.factors) {
    ordered_json fj;
    ordered_json adj = ordered_json::array();
    ordered_json act = ordered_json::array();
    for (Index l = 0; l < f.tau(); ++l) {
      adj.push_back(matrix_to_json(f.adjacency[static_cast<std::size_t>(l)]));
      act.push_back(matrix_to_json(f.activation[static_cast<std::size_t>(l)].cast<double>()));
    }
    fj["adjacency"] = std::move(adj);
    fj["activation"] = std::move(act);
    fj["amp"] = vector_to_json(f.amp);
    fj["innov_mu"] = vector_to_json(f.innov_mu);
    fj["innov_var"] = vector_to_json(f.innov_var);
    fj["base_freq"] = vector_to_json(f.base_freq);
    factors.push_back(std::move(fj));
  }
  j["factors"] = std::move(factors);
  return j.dump(2) + "\n";
}

SystemSpec system_from_json(const std::string& text) {
  const auto j = ordered_json::parse(text);
  if (j.at("format_version").get<int>() != 1)
    throw std::runtime_error("unsupported system file format version");
  SystemSpec spec;
  spec.n_c = j.at("n_c").get<Index>();
  spec.n_e = j.at("n_e").get<Index>();
  spec.mix_noise_std = j.at("mix_noise_std").get<double>();
  spec.burn_in = j.at("burn_in").get<Index>();
  for (const auto& fj : j.at("factors")) {
    VarFactorSpec f;
    for (const auto& a : fj.at("adjacency")) f.adjacency.push_back(matrix_from_json(a));
    for (const auto& a : fj.at("activation"))
      f.activation.push_back(matrix_from_json(a).cast<int>());
    f.amp = vector_from_json(fj.at("amp"));
    f.innov_mu = vector_from_json(fj.at("innov_mu"));
    f.innov_var = vector_from_json(fj.at("innov_var"));
    f.base_freq = vector_from_json(fj.at("base_freq"));
    spec.factors.push_back(std::move(f));
  }
  return spec;
}

}  // namespace redcliff
