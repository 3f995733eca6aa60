#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "redcliff/dataset.hpp"
#include "redcliff/evaluation.hpp"
#include "redcliff/io.hpp"
#include "redcliff/manifest.hpp"
#include "redcliff/model.hpp"
#include "redcliff/svg.hpp"
#include "redcliff/synth.hpp"
#include "redcliff/training.hpp"

namespace fs = std::filesystem;
using namespace redcliff;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitDivergence = 3;

int max_threads() {
  const char* env = std::getenv("REDCLIFF_THREADS");
  if (!env) return 1;
  const int v = std::atoi(env);
  if (v < 1) throw std::invalid_argument("REDCLIFF_THREADS must be a positive integer");
  return v;
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

struct GenArgs {
  Index n_c = 12, n_e = 33, n_k = 3, repeats = 5;
  std::uint64_t seed = 0;
  std::string out;
  Index t_window = 100, stride = 100, train_per_class = 1040, val_per_class = 240;
  Index tau = 2, burn_in = 50, knot_spacing = 100;
  double mix_noise_std = 0.1, innov_amp = 1.0, innov_mu = 0.0, innov_var = 0.0;
  Index emit_recording = 0;
};

std::string gen_params_json(const GenConfig& cfg) {
  nlohmann::ordered_json j;
  j["n_c"] = cfg.n_c;
  j["n_e"] = cfg.n_e;
  j["n_k"] = cfg.n_k;
  j["t_window"] = cfg.t_window;
  j["stride"] = cfg.stride;
  j["train_per_class"] = cfg.train_per_class;
  j["val_per_class"] = cfg.val_per_class;
  j["tau"] = cfg.system.tau;
  j["burn_in"] = cfg.system.burn_in;
  j["knot_spacing"] = cfg.system.knot_spacing;
  j["mix_noise_std"] = cfg.system.mix_noise_std;
  j["innovations_amp"] = cfg.system.innovations_amp;
  j["innovations_mu"] = cfg.system.innovations_mu;
  j["innovations_var"] = cfg.system.innovations_var;
  j["seed"] = cfg.seed;
  return j.dump();
}

int cmd_gen_synth(const GenArgs& a) {
  Timer timer;
  const fs::path out(a.out);
  DirectoryLock lock(out);

  if (a.n_e > 0) {
    const auto rating = complexity_rating(a.n_c, a.n_e);
    std::printf("system complexity: %.6g (%s)\n", rating.value, to_string(rating.category).c_str());
  } else {
    std::printf("system complexity: undefined (n_e = 0)\n");
  }

  for (Index r = 0; r < a.repeats; ++r) {
    GenConfig cfg;
    cfg.n_c = a.n_c;
    cfg.n_e = a.n_e;
    cfg.n_k = a.n_k;
    cfg.t_window = a.t_window;
    cfg.stride = a.stride;
    cfg.train_per_class = a.train_per_class;
    cfg.val_per_class = a.val_per_class;
    cfg.seed = a.seed + static_cast<std::uint64_t>(r);
    cfg.system.tau = a.tau;
    cfg.system.burn_in = a.burn_in;
    cfg.system.knot_spacing = a.knot_spacing;
    cfg.system.mix_noise_std = a.mix_noise_std;
    cfg.system.innovations_amp = a.innov_amp;
    cfg.system.innovations_mu = a.innov_mu;
    cfg.system.innovations_var = a.innov_var;

    const fs::path dir = out / ("repeat_" + std::to_string(r));
    fs::create_directories(dir);
    const GeneratedData data = generate_dataset(cfg);
    export_dataset(data.train, data.val, gen_params_json(cfg), dir);
    write_text_file(dir / "system.json", system_to_json(data.spec));
    if (a.emit_recording > 0) {
      Rng rec_rng = Rng(cfg.seed).fork(7777);
      const Recording rec = simulate_recording(data.spec, a.emit_recording, rec_rng);
      save_recording(dir / "recording.bin", rec.x);
    }

    RunManifest m;
    m.command = "gen-synth";
    m.seed = cfg.seed;
    m.config_json = gen_params_json(cfg);
    m.outputs = {(dir / "meta.json").string(), (dir / "train.bin").string(),
                 (dir / "val.bin").string(), (dir / "system.json").string()};
    m.wall_seconds = timer.seconds();
    write_manifest(m, dir);
    std::printf("repeat %lld: %zu train / %zu val windows -> %s\n", static_cast<long long>(r),
                data.train.samples.size(), data.val.samples.size(), dir.string().c_str());
  }
  return 0;
}

struct CombineArgs {
  std::vector<std::string> inputs;
  Index dominant = -1;  // -1: every fold dominant once
  double coeff_dominant = 10.0;
  double coeff_background = 0.1;
  Index t_window = 100, stride = 100;
  double train_fraction = 0.8;
  std::string out;
};

int cmd_combine(const CombineArgs& a) {
  Timer timer;
  if (a.inputs.size() < 2)
    throw std::invalid_argument("combine: need at least two input recordings");
  const fs::path out(a.out);
  DirectoryLock lock(out);

  RunManifest m;
  m.command = "combine";
  for (const auto& p : a.inputs) add_input_hash(m, p);

  std::vector<Eigen::MatrixXd> recs;
  for (const auto& p : a.inputs) recs.push_back(load_recording(p));

  std::vector<Index> dominants;
  if (a.dominant >= 0)
    dominants.push_back(a.dominant);
  else
    for (Index k = 0; k < static_cast<Index>(recs.size()); ++k) dominants.push_back(k);

  std::vector<Eigen::MatrixXd> combined;
  for (Index d : dominants) {
    combined.push_back(combine_folds(recs, d, a.coeff_dominant, a.coeff_background));
    const fs::path path = out / ("combined_" + std::to_string(d) + ".bin");
    save_recording(path, combined.back());
    m.outputs.push_back(path.string());
  }

  GeneratedData data =
      windows_from_class_recordings(combined, a.t_window, a.stride, a.train_fraction);
  nlohmann::ordered_json cfg;
  cfg["dominant_coeff"] = a.coeff_dominant;
  cfg["background_coeff"] = a.coeff_background;
  cfg["t_window"] = a.t_window;
  cfg["stride"] = a.stride;
  cfg["train_fraction"] = a.train_fraction;
  export_dataset(data.train, data.val, cfg.dump(), out);
  m.config_json = cfg.dump();
  m.outputs.push_back((out / "meta.json").string());
  m.wall_seconds = timer.seconds();
  write_manifest(m, out);
  std::printf("combined %zu folds -> %zu train / %zu val windows\n", recs.size(),
              data.train.samples.size(), data.val.samples.size());
  return 0;
}

struct TrainArgs {
  std::string data, config, out, ablation;
  long long seed = -1;
};

int cmd_train(const TrainArgs& a) {
  Timer timer;
  const fs::path out(a.out);
  DirectoryLock lock(out);

  RunManifest m;
  m.command = "train";
  add_input_hash(m, fs::path(a.data) / "meta.json");
  add_input_hash(m, fs::path(a.data) / "train.bin");
  add_input_hash(m, fs::path(a.data) / "val.bin");
  if (!a.config.empty()) add_input_hash(m, a.config);

  TrainConfig cfg;
  if (!a.config.empty()) cfg = train_config_from_json(read_text_file(a.config));
  if (a.seed >= 0) cfg.seed = static_cast<std::uint64_t>(a.seed);
  if (!a.ablation.empty()) {
    if (a.ablation == "rho_zero")
      cfg.rho_zero = true;
    else if (a.ablation == "single_factor")
      cfg.single_factor = true;
    else if (a.ablation == "alpha_pinned_one")
      cfg.alpha_pinned_one = true;
    else if (a.ablation == "lambda_zero")
      cfg.lambda_zero = true;
    else
      throw std::invalid_argument("unknown ablation: " + a.ablation);
  }
  cfg = apply_ablation(cfg);

  const DatasetBundle data = import_dataset(a.data);
  if (cfg.lambda > 0.0 && !cfg.single_factor && data.train.B == 0)
    throw std::invalid_argument("lambda > 0 requires labeled data (dataset has B = 0)");

  const ModelConfig mc = model_config_from(cfg, data.train.n_c, data.train.B);
  Rng model_rng = Rng(cfg.seed).fork(11);
  RedcliffModel model = RedcliffModel::make(mc, model_rng);

  write_text_file(out / "train.json", train_config_to_json(cfg));
  const TrainOutcome outcome = run_training(model, data, cfg, out);

  m.config_json = train_config_to_json(cfg);
  m.seed = cfg.seed;
  m.outputs = {(out / "history.csv").string(), (out / "checkpoint_best").string(),
               (out / "checkpoint_final").string()};
  m.wall_seconds = timer.seconds();
  write_manifest(m, out);
  const auto& best = outcome.records[outcome.best_record];
  std::printf("trained %lld epochs; best criterion %.6g at epoch %lld\n",
              static_cast<long long>(cfg.max_iter), best.criterion_value,
              static_cast<long long>(best.epoch));
  return 0;
}

struct EvalArgs {
  std::string model, truth, out, label, diff;
  Index top_k = 10;
};

int cmd_eval(const EvalArgs& a) {
  Timer timer;
  const fs::path out(a.out);
  DirectoryLock lock(out);

  fs::path ckpt(a.model);
  if (!fs::exists(ckpt / "model.json") && fs::exists(ckpt / "checkpoint_best" / "model.json"))
    ckpt = ckpt / "checkpoint_best";

  fs::path truth_path(a.truth);
  if (fs::is_directory(truth_path)) truth_path = truth_path / "system.json";

  RunManifest m;
  m.command = "eval";
  add_input_hash(m, ckpt / "model.json");
  add_input_hash(m, ckpt / "weights.bin");
  add_input_hash(m, truth_path);

  const RedcliffModel model = load_checkpoint(ckpt);
  const SystemSpec spec = system_from_json(read_text_file(truth_path));
  const GraphEstimate truth = truth_graphs(spec);

  GraphEstimate est;
  est.source = a.label.empty() ? ckpt.string() : a.label;
  for (auto& mat : model.adjacency_estimates()) est.matrices.push_back(mat);
  const GraphEstimate standardized = standardize(est, spec.n_k());

  const auto rows = score_against_truth(est, truth, model.cfg.B);
  const EvalReport report = make_report(est.source, rows);

  std::vector<std::vector<std::pair<Index, Index>>> top_edges;
  for (std::size_t k = 0; k < standardized.matrices.size(); ++k) {
    Eigen::MatrixXd offdiag = standardized.matrices[k];
    offdiag.diagonal().setZero();
    top_edges.push_back(top_k_edges(offdiag, a.top_k));
    const fs::path svg_path = out / ("factor_" + std::to_string(k) + ".svg");
    write_text_file(svg_path, heatmap_svg(offdiag, "factor " + std::to_string(k) +
                                                       " inter-variable estimates"));
    m.outputs.push_back(svg_path.string());
  }
  if (!a.diff.empty()) {
    const auto comma = a.diff.find(',');
    if (comma == std::string::npos)
      throw std::invalid_argument("--diff expects two factor indices: p,q");
    const auto p = static_cast<std::size_t>(std::stol(a.diff.substr(0, comma)));
    const auto q = static_cast<std::size_t>(std::stol(a.diff.substr(comma + 1)));
    if (p >= standardized.matrices.size() || q >= standardized.matrices.size())
      throw std::invalid_argument("--diff factor index out of range");
    auto norm = [](Eigen::MatrixXd mtx) {
      mtx.diagonal().setZero();
      const double mx = mtx.maxCoeff();
      if (mx > 0.0) mtx /= mx;
      return mtx;
    };
    const Eigen::MatrixXd d = norm(standardized.matrices[p]) - norm(standardized.matrices[q]);
    const fs::path path = out / ("diff_" + std::to_string(p) + "_" + std::to_string(q) + ".svg");
    write_text_file(path, diff_heatmap_svg(d, "factor " + std::to_string(p) + " - factor " +
                                                  std::to_string(q) + " (normalized)"));
    m.outputs.push_back(path.string());
  }

  write_text_file(out / "report.json", report_to_json(report, top_edges, a.top_k));
  write_text_file(out / "report.csv", report_to_csv(report));
  m.outputs.push_back((out / "report.json").string());
  m.outputs.push_back((out / "report.csv").string());
  m.wall_seconds = timer.seconds();
  write_manifest(m, out);
  std::printf("eval %s: mean optimal F1 %.4f, mean ROC-AUC %.4f over %zu factors\n",
              est.source.c_str(), report.agg_f1.mean, report.agg_auc.mean, rows.size());
  return 0;
}

struct ReportArgs {
  std::vector<std::string> runs;
  std::string out;
};

int cmd_report(const ReportArgs& a) {
  Timer timer;
  if (a.runs.empty()) throw std::invalid_argument("report: need at least one run directory");
  const fs::path out(a.out);
  DirectoryLock lock(out);

  RunManifest m;
  m.command = "report";

  struct RunRows {
    std::string label;
    std::vector<double> f1, auc, shd_upper, shd_lower;
  };
  std::vector<RunRows> runs;
  for (const auto& dir : a.runs) {
    add_input_hash(m, fs::path(dir) / "report.json");
    const auto j = nlohmann::ordered_json::parse(read_text_file(fs::path(dir) / "report.json"));
    RunRows r;
    r.label = j.at("run_label").get<std::string>();
    for (const auto& row : j.at("rows")) {
      r.f1.push_back(row.at("optimal_f1").get<double>());
      r.auc.push_back(row.at("roc_auc").get<double>());
      r.shd_upper.push_back(row.at("shd_upper").get<double>());
      r.shd_lower.push_back(row.at("shd_lower").get<double>());
    }
    runs.push_back(std::move(r));
  }

  std::vector<std::vector<double>> table;
  for (const auto& r : runs)
    table.push_back({mean_sem(r.f1).mean, mean_sem(r.auc).mean, mean_sem(r.shd_upper).mean,
                     mean_sem(r.shd_lower).mean});
  const std::vector<bool> higher = {true, true, false, false};
  const auto placement = comparative_placement(table, higher);

  nlohmann::ordered_json j;
  j["format_version"] = 1;
  nlohmann::ordered_json methods = nlohmann::ordered_json::array();
  std::string csv = "run,metric,mean,sem\n";
  for (std::size_t i = 0; i < runs.size(); ++i) {
    nlohmann::ordered_json e;
    e["run_label"] = runs[i].label;
    auto ms = [](const MeanSem& v) {
      nlohmann::ordered_json o;
      o["mean"] = v.mean;
      o["sem"] = v.sem;
      return o;
    };
    const auto f1 = mean_sem(runs[i].f1), auc = mean_sem(runs[i].auc),
               su = mean_sem(runs[i].shd_upper), sl = mean_sem(runs[i].shd_lower);
    e["optimal_f1"] = ms(f1);
    e["roc_auc"] = ms(auc);
    e["shd_upper"] = ms(su);
    e["shd_lower"] = ms(sl);
    e["placement"] = placement[i];
    methods.push_back(std::move(e));
    for (const auto& [name, v] :
         std::vector<std::pair<std::string, MeanSem>>{{"optimal_f1", f1},
                                                      {"roc_auc", auc},
                                                      {"shd_upper", su},
                                                      {"shd_lower", sl}}) {
      char line[160];
      std::snprintf(line, sizeof(line), "%s,%s,%.17g,%.17g\n", runs[i].label.c_str(), name.c_str(),
                    v.mean, v.sem);
      csv += line;
    }
  }
  j["methods"] = std::move(methods);

  // Pairwise optimal-F1 improvement of the first run over each other run,
  // defined when per-factor row sets align.
  nlohmann::ordered_json improvements = nlohmann::ordered_json::array();
  for (std::size_t i = 1; i < runs.size(); ++i) {
    if (runs[i].f1.size() != runs[0].f1.size()) continue;
    const MeanSem d = pairwise_improvement(runs[0].f1, runs[i].f1);
    nlohmann::ordered_json e;
    e["baseline"] = runs[i].label;
    e["mean"] = d.mean;
    e["sem"] = d.sem;
    improvements.push_back(std::move(e));
  }
  j["pairwise_f1_improvement_of_first"] = std::move(improvements);

  write_text_file(out / "report.json", j.dump(2) + "\n");
  write_text_file(out / "report.csv", csv);
  m.outputs = {(out / "report.json").string(), (out / "report.csv").string()};
  m.wall_seconds = timer.seconds();
  write_manifest(m, out);
  std::printf("aggregated %zu runs\n", runs.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"REDCLIFF-S dynamic causal graph hypothesis toolkit"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen-synth", "Generate labeled synthetic-system datasets");
  g->add_option("--n-c", gen.n_c, "Channels");
  g->add_option("--n-e", gen.n_e, "Inter-variable edges per factor");
  g->add_option("--n-k", gen.n_k, "Factors (= label classes)");
  g->add_option("--repeats", gen.repeats, "Independent repeats");
  g->add_option("--seed", gen.seed, "Base seed");
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--t-window", gen.t_window);
  g->add_option("--stride", gen.stride);
  g->add_option("--train-per-class", gen.train_per_class);
  g->add_option("--val-per-class", gen.val_per_class);
  g->add_option("--tau", gen.tau);
  g->add_option("--burn-in", gen.burn_in);
  g->add_option("--knot-spacing", gen.knot_spacing);
  g->add_option("--mix-noise-std", gen.mix_noise_std);
  g->add_option("--innov-amp", gen.innov_amp);
  g->add_option("--innov-mu", gen.innov_mu);
  g->add_option("--innov-var", gen.innov_var);
  g->add_option("--emit-recording", gen.emit_recording,
                "Also write recording.bin with this many steps");

  CombineArgs comb;
  auto* c = app.add_subcommand("combine", "Superpose fold recordings into a labeled dataset");
  c->add_option("--inputs", comb.inputs, "Recording files")->required()->expected(-2);
  c->add_option("--dominant", comb.dominant, "Dominant fold (-1: each in turn)");
  c->add_option("--coeff-dominant", comb.coeff_dominant);
  c->add_option("--coeff-background", comb.coeff_background);
  c->add_option("--t-window", comb.t_window);
  c->add_option("--stride", comb.stride);
  c->add_option("--train-frac", comb.train_fraction);
  c->add_option("--out", comb.out, "Output dataset directory")->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model on a dataset directory");
  t->add_option("--data", tr.data, "Dataset directory")->required();
  t->add_option("--config", tr.config, "train.json config file");
  t->add_option("--out", tr.out, "Run directory")->required();
  t->add_option("--ablation", tr.ablation,
                "One of rho_zero|single_factor|alpha_pinned_one|lambda_zero");
  t->add_option("--seed", tr.seed, "Seed override");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score a checkpoint against ground truth");
  e->add_option("--model", ev.model, "Run or checkpoint directory")->required();
  e->add_option("--truth", ev.truth, "system.json or dataset directory")->required();
  e->add_option("--out", ev.out, "Evaluation output directory")->required();
  e->add_option("--label", ev.label, "Run label in reports");
  e->add_option("--top-k", ev.top_k, "Edges listed per factor");
  e->add_option("--diff", ev.diff, "Emit difference heatmap between factors p,q");

  ReportArgs rep;
  auto* r = app.add_subcommand("report", "Aggregate evaluation runs");
  r->add_option("--runs", rep.runs, "Evaluation directories")->required()->expected(-1);
  r->add_option("--out", rep.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err) == 0 ? 0 : kExitValidation;
  }

  try {
    max_threads();  // validate the env cap even though commands run sequentially
    if (*g) return cmd_gen_synth(gen);
    if (*c) return cmd_combine(comb);
    if (*t) return cmd_train(tr);
    if (*e) return cmd_eval(ev);
    if (*r) return cmd_report(rep);
  } catch (const DivergenceError& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitDivergence;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitValidation;
  }
  return kExitValidation;
}
