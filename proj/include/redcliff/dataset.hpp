#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "redcliff/rng.hpp"
#include "redcliff/synth.hpp"

namespace redcliff {

struct Window {
  Eigen::MatrixXd x;   // n_c x t_window
  Eigen::VectorXd y;   // one-hot, length B
};

struct WindowedDataset {
  std::vector<Window> samples;
  Index n_c = 0;
  Index B = 0;
  Index t_window = 0;
  std::string split;       // "train" or "val"
  std::uint64_t seed = 0;
};

/// Sliding windows over a recording; each label is the one-hot argmax of the
/// trajectory at the window's final step, ties going to the lowest factor
/// index. Throws when t_window exceeds the recording length.
WindowedDataset label_windows(const Eigen::MatrixXd& x, const WeightTrajectory& trajectory,
                              Index t_window, Index stride);

struct GenConfig {
  Index n_c = 12;
  Index n_e = 33;
  Index n_k = 3;
  Index t_window = 100;
  Index stride = 100;
  Index train_per_class = 1040;
  Index val_per_class = 240;
  std::uint64_t seed = 0;
  SystemGenParams system;
};

struct GeneratedData {
  SystemSpec spec;
  WindowedDataset train;
  WindowedDataset val;
};

/// Builds the system, then simulates fresh recordings until every class has
/// its train+val quota of windows; per class the earliest windows fill the
/// train split. Fully determined by cfg.seed.
GeneratedData generate_dataset(const GenConfig& cfg);

/// Windows taken from per-class recordings (one recording per class, e.g.
/// combined folds); class k windows all carry label k.
GeneratedData windows_from_class_recordings(const std::vector<Eigen::MatrixXd>& recordings,
                                            Index t_window, Index stride, double train_fraction);

// Dataset directory: meta.json + train.bin + val.bin. Each .bin holds all
// sample blocks [sample][channel][time] as little-endian float64, followed by
// all labels [sample][B], then a CRC32 trailer.
void export_dataset(const WindowedDataset& train, const WindowedDataset& val,
                    const std::string& generator_params_json, const std::filesystem::path& dir);

struct DatasetBundle {
  WindowedDataset train;
  WindowedDataset val;
  std::string generator_params_json;
};

DatasetBundle import_dataset(const std::filesystem::path& dir);

}  // namespace redcliff
