#include "redcliff/dataset.hpp"

#include <stdexcept>

#include "json.hpp"
#include "redcliff/io.hpp"

namespace redcliff {

namespace {

using ordered_json = nlohmann::ordered_json;

Index argmax_lowest(const Eigen::VectorXd& v) {
  Index best = 0;
  for (Index i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

void write_split(const WindowedDataset& ds, const std::filesystem::path& path) {
  std::vector<std::byte> buf;
  const std::size_t n = ds.samples.size();
  buf.reserve(n * 8 * static_cast<std::size_t>(ds.n_c * ds.t_window + ds.B));
  for (const auto& s : ds.samples) {
    RowMat x = s.x;
    append_f64(buf, x.data(), static_cast<std::size_t>(x.size()));
  }
  for (const auto& s : ds.samples) append_f64(buf, s.y.data(), static_cast<std::size_t>(s.y.size()));
  write_file_with_crc(path, buf);
}

WindowedDataset read_split(const std::filesystem::path& path, Index count, Index n_c, Index b,
                           Index t_window, const std::string& split, std::uint64_t seed) {
  const auto buf = read_file_with_crc(path);
  const auto expected =
      static_cast<std::size_t>(count) * 8 * static_cast<std::size_t>(n_c * t_window + b);
  if (buf.size() != expected)
    throw std::runtime_error("shape mismatch: " + path.string() + " does not match meta.json counts");
  WindowedDataset ds;
  ds.n_c = n_c;
  ds.B = b;
  ds.t_window = t_window;
  ds.split = split;
  ds.seed = seed;
  ds.samples.resize(static_cast<std::size_t>(count));
  std::size_t off = 0;
  for (auto& s : ds.samples) {
    RowMat x(n_c, t_window);
    read_f64(buf, off, x.data(), static_cast<std::size_t>(x.size()));
    s.x = x;
  }
  for (auto& s : ds.samples) {
    s.y.resize(b);
    read_f64(buf, off, s.y.data(), static_cast<std::size_t>(b));
  }
  return ds;
}

}  // namespace

WindowedDataset label_windows(const Eigen::MatrixXd& x, const WeightTrajectory& trajectory,
                              Index t_window, Index stride) {
  const Index t = x.cols();
  if (t_window < 1 || t_window > t)
    throw std::invalid_argument("label_windows: t_window must be in [1, T]");
  if (stride < 1) throw std::invalid_argument("label_windows: stride must be >= 1");
  if (trajectory.weights.cols() != t)
    throw std::invalid_argument("label_windows: trajectory length != recording length");

  const Index n_k = trajectory.weights.rows();
  WindowedDataset ds;
  ds.n_c = x.rows();
  ds.B = n_k;
  ds.t_window = t_window;
  for (Index start = 0; start + t_window <= t; start += stride) {
    Window w;
    w.x = x.middleCols(start, t_window);
    w.y = Eigen::VectorXd::Zero(n_k);
    w.y[argmax_lowest(trajectory.weights.col(start + t_window - 1))] = 1.0;
    ds.samples.push_back(std::move(w));
  }
  return ds;
}

GeneratedData generate_dataset(const GenConfig& cfg) {
  if (cfg.train_per_class < 0 || cfg.val_per_class < 0)
    throw std::invalid_argument("generate_dataset: negative per-class counts");

  Rng root(cfg.seed);
  Rng system_rng = root.fork(0);
  GeneratedData out;
  out.spec = build_system(cfg.n_c, cfg.n_e, cfg.n_k, system_rng, cfg.system);

  const Index per_class = cfg.train_per_class + cfg.val_per_class;
  std::vector<std::vector<Window>> by_class(static_cast<std::size_t>(cfg.n_k));
  // Each chunk yields ~64 windows; fresh fork per chunk keeps draws aligned
  // regardless of how many chunks end up being needed.
  const Index chunk_t = cfg.stride * 63 + cfg.t_window;
  bool filled = false;
  for (std::uint64_t chunk = 0; !filled; ++chunk) {
    if (chunk > 100000)
      throw std::runtime_error("generate_dataset: class quotas unreachable (label imbalance)");
    Rng chunk_rng = root.fork(100 + chunk);
    const Recording rec = simulate_recording(out.spec, chunk_t, chunk_rng);
    const WindowedDataset windows = label_windows(rec.x, rec.trajectory, cfg.t_window, cfg.stride);
    for (const auto& w : windows.samples) {
      const auto cls = static_cast<std::size_t>(argmax_lowest(w.y));
      if (static_cast<Index>(by_class[cls].size()) < per_class) by_class[cls].push_back(w);
    }
    filled = true;
    for (const auto& c : by_class) filled = filled && static_cast<Index>(c.size()) >= per_class;
  }

  auto init = [&](WindowedDataset& ds, const std::string& split) {
    ds.n_c = cfg.n_c;
    ds.B = cfg.n_k;
    ds.t_window = cfg.t_window;
    ds.split = split;
    ds.seed = cfg.seed;
  };
  init(out.train, "train");
  init(out.val, "val");
  for (Index cls = 0; cls < cfg.n_k; ++cls) {
    const auto& pool = by_class[static_cast<std::size_t>(cls)];
    for (Index i = 0; i < cfg.train_per_class; ++i)
      out.train.samples.push_back(pool[static_cast<std::size_t>(i)]);
    for (Index i = 0; i < cfg.val_per_class; ++i)
      out.val.samples.push_back(pool[static_cast<std::size_t>(cfg.train_per_class + i)]);
  }
  return out;
}

GeneratedData windows_from_class_recordings(const std::vector<Eigen::MatrixXd>& recordings,
                                            Index t_window, Index stride, double train_fraction) {
  if (recordings.empty())
    throw std::invalid_argument("windows_from_class_recordings: no recordings");
  if (train_fraction <= 0.0 || train_fraction >= 1.0)
    throw std::invalid_argument("windows_from_class_recordings: train_fraction must be in (0,1)");
  const auto n_k = static_cast<Index>(recordings.size());
  GeneratedData out;
  out.train.n_c = out.val.n_c = recordings[0].rows();
  out.train.B = out.val.B = n_k;
  out.train.t_window = out.val.t_window = t_window;
  out.train.split = "train";
  out.val.split = "val";
  for (Index cls = 0; cls < n_k; ++cls) {
    const auto& x = recordings[static_cast<std::size_t>(cls)];
    if (x.rows() != out.train.n_c)
      throw std::invalid_argument("windows_from_class_recordings: channel mismatch");
    std::vector<Window> windows;
    for (Index start = 0; start + t_window <= x.cols(); start += stride) {
      Window w;
      w.x = x.middleCols(start, t_window);
      w.y = Eigen::VectorXd::Zero(n_k);
      w.y[cls] = 1.0;
      windows.push_back(std::move(w));
    }
    const auto n_train = static_cast<std::size_t>(
        static_cast<double>(windows.size()) * train_fraction);
    for (std::size_t i = 0; i < windows.size(); ++i)
      (i < n_train ? out.train : out.val).samples.push_back(windows[i]);
  }
  return out;
}

void export_dataset(const WindowedDataset& train, const WindowedDataset& val,
                    const std::string& generator_params_json, const std::filesystem::path& dir) {
  if (train.n_c != val.n_c || train.B != val.B || train.t_window != val.t_window)
    throw std::invalid_argument("export_dataset: train/val metadata mismatch");
  std::filesystem::create_directories(dir);
  ordered_json meta;
  meta["format_version"] = 1;
  meta["n_c"] = train.n_c;
  meta["B"] = train.B;
  meta["t_window"] = train.t_window;
  meta["train_count"] = train.samples.size();
  meta["val_count"] = val.samples.size();
  meta["seed"] = train.seed;
  meta["generator"] =
      generator_params_json.empty() ? ordered_json() : ordered_json::parse(generator_params_json);
  write_text_file(dir / "meta.json", meta.dump(2) + "\n");
  write_split(train, dir / "train.bin");
  write_split(val, dir / "val.bin");
}

DatasetBundle import_dataset(const std::filesystem::path& dir) {
  ordered_json meta;
  try {
    meta = ordered_json::parse(read_text_file(dir / "meta.json"));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("corrupt header: meta.json unreadable: " + std::string(e.what()));
  }
  const int version = meta.at("format_version").get<int>();
  if (version != 1)
    throw std::runtime_error("unsupported dataset format version " + std::to_string(version));
  const auto n_c = meta.at("n_c").get<Index>();
  const auto b = meta.at("B").get<Index>();
  const auto t_window = meta.at("t_window").get<Index>();
  const auto seed = meta.at("seed").get<std::uint64_t>();
  DatasetBundle bundle;
  bundle.train = read_split(dir / "train.bin", meta.at("train_count").get<Index>(), n_c, b,
                            t_window, "train", seed);
  bundle.val =
      read_split(dir / "val.bin", meta.at("val_count").get<Index>(), n_c, b, t_window, "val", seed);
  bundle.generator_params_json = meta.at("generator").is_null() ? "" : meta.at("generator").dump();
  return bundle;
}

}  // namespace redcliff
