#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "redcliff/model.hpp"
#include "redcliff/optim.hpp"

namespace redcliff {

/// Raised when a training loss stops being finite.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  // Loss coefficients. Negative eta/rho select the size-adaptive defaults
  // 0.1/(n_k*sqrt(n_c^2-1)) and 1/sum_{i=1}^{n_k-1} i.
  double eta = -1.0;
  double omega = 10.0;
  double rho = -1.0;
  double gamma = 0.001;
  double lambda = 100.0;

  double gen_lr = 0.0005;
  double embed_lr = 0.0005;
  double weight_decay = 0.0001;
  double eps = 0.0001;

  Index batch_size = 128;
  Index max_iter = 300;
  Index pretrain_epochs = 100;
  Index acclimation_epochs = 100;

  Index n_k = 0;  // 0: one factor per dataset label
  Index tau_in = 4;
  Index embed_lag = 16;  // tau_in + tau_cl
  std::vector<Index> gen_hidden = {25};
  std::vector<Index> embed_hidden = {100};

  double criterion_cos_multiplier = 1.0;
  bool sigmoid_alpha = false;

  // One-at-a-time ablations.
  bool rho_zero = false;
  bool single_factor = false;
  bool alpha_pinned_one = false;
  bool lambda_zero = false;

  std::uint64_t seed = 0;
};

std::string train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const std::string& text);

/// Validates that at most one ablation flag is set and folds the numeric
/// effects in (rho_zero -> rho = 0, lambda_zero -> lambda = 0,
/// single_factor -> n_k = 1).
TrainConfig apply_ablation(const TrainConfig& cfg);

/// Concrete coefficients for a dataset size; resolves the adaptive defaults.
LossCoefficients resolve_coefficients(const TrainConfig& cfg, Index n_c, Index n_k);

/// Model shape implied by config + dataset labels. single_factor drops the
/// state model entirely (the bare forecaster pipeline).
ModelConfig model_config_from(const TrainConfig& cfg, Index n_c, Index dataset_b);

struct CriterionComponents {
  double forecast = 0.0;  // mean validation forecast MSE
  double label = 0.0;     // mean validation label MSE (0 without supervision)
  double cos_sim = 0.0;   // multiplier-weighted pairwise CosSim of max-normalized graphs
};

/// Validation stopping criterion: omega*forecast + lambda*label + rho*cos_sim.
double criterion_value(const CriterionComponents& c, const LossCoefficients& coeff);

CriterionComponents stopping_criterion(const RedcliffModel& model, const BatchData& val,
                                       const TrainConfig& cfg);

struct CheckpointRecord {
  Index epoch = 0;
  double criterion_value = 0.0;
  CriterionComponents components;
  std::string path;  // empty unless this epoch's checkpoint is retained
};

/// Index of the minimal-criterion record.
std::size_t select_checkpoint(const std::vector<CheckpointRecord>& records);

struct EpochStats {
  std::string phase;
  Index epoch = 0;
  double train_loss = 0.0;
  double lag_l1 = 0.0, forecast_mse = 0.0, cos_penalty = 0.0, alpha_l1 = 0.0, label_mse = 0.0;
  double criterion = 0.0;
  CriterionComponents criterion_parts;
};

/// Phase 1: update only the state model against loss_g + lambda*MSE(Y, Y_hat).
std::vector<EpochStats> pretrain_state(RedcliffModel& model, const BatchData& train,
                                       const BatchData& val, const TrainConfig& cfg);

/// Phase 2: freeze the state model, train the factors against the factor loss.
std::vector<EpochStats> acclimate_factors(RedcliffModel& model, const BatchData& train,
                                          const BatchData& val, const TrainConfig& cfg);

struct JointResult {
  std::vector<EpochStats> stats;
  std::vector<CheckpointRecord> records;
};

/// Phase 3: full objective; evaluates the stopping criterion each epoch and
/// retains best + final checkpoints when out_dir is nonempty.
JointResult joint_train(RedcliffModel& model, const BatchData& train, const BatchData& val,
                        const TrainConfig& cfg, const std::filesystem::path& out_dir = {});

struct TrainOutcome {
  std::vector<EpochStats> history;
  std::vector<CheckpointRecord> records;
  std::size_t best_record = 0;
};

/// All three phases; writes history.csv plus best/final checkpoints into
/// out_dir when given.
TrainOutcome run_training(RedcliffModel& model, const DatasetBundle& data, const TrainConfig& cfg,
                          const std::filesystem::path& out_dir = {});

std::string history_to_csv(const std::vector<EpochStats>& history);

// Checkpoint directory: model.json manifest + weights.bin (little-endian
// float64 in manifest order, CRC32 trailer).
void save_checkpoint(const RedcliffModel& model, const std::filesystem::path& dir);
RedcliffModel load_checkpoint(const std::filesystem::path& dir);

/// CRC32 over the raw bytes of every parameter in declared order.
std::uint32_t params_checksum(const std::vector<Tensor>& params);

}  // namespace redcliff
