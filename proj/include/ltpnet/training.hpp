#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ltpnet/hyperparams.hpp"
#include "ltpnet/metrics.hpp"
#include "ltpnet/model.hpp"
#include "ltpnet/optim.hpp"
#include "ltpnet/preprocessing.hpp"
#include "ltpnet/pso.hpp"

namespace ltpnet {

struct TrainConfig {
  std::size_t batch_size = 64;
  std::size_t epochs = 100;
  std::size_t iterations_per_epoch = 1000;
  std::size_t patience = 10;
  double min_delta = 1e-9;
  OptimizerKind optimizer = OptimizerKind::sgd;
  /// When set, one learning rate for every component (Adam and
  /// adaptive-momentum runs); otherwise the hyperparameter point's rates.
  std::optional<double> uniform_learning_rate;
  AdamSettings adam;
  MomentumSettings momentum;
  double clip_norm = 5.0;
  /// Fraction of the training indices (the chronologically last ones) held
  /// out for early stopping.
  double validation_fraction = 0.15;
  std::size_t lstm_layers = 2;
  std::size_t head_width = 64;
  std::size_t d_ff_multiplier = 4;
  bool lstm_enabled = true;
  bool transformer_enabled = true;
  std::uint64_t init_seed = 1;
  std::uint64_t shuffle_seed = 2;

  void validate() const;
};

/// Stops once validation loss has failed to improve by more than
/// `min_delta` for `patience` consecutive epochs.
class EarlyStopping {
 public:
  EarlyStopping(std::size_t patience, double min_delta);
  /// Records the loss of the next epoch (1-based). Returns true if this
  /// epoch is the new best.
  bool observe(double validation_loss);
  bool should_stop() const { return stale_ >= patience_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }
  std::size_t epochs_seen() const { return epoch_; }

 private:
  std::size_t patience_;
  double min_delta_;
  std::size_t epoch_ = 0;
  std::size_t best_epoch_ = 0;
  double best_loss_;
  std::size_t stale_ = 0;
};

struct TrainReport {
  std::vector<double> train_loss;       // mean batch loss per epoch
  std::vector<double> validation_loss;  // per epoch
  std::size_t stopped_epoch = 0;
  std::size_t best_epoch = 0;
  double initial_train_mse = 0.0;
  double final_train_mse = 0.0;
  double training_seconds = 0.0;
  ModelParams params;  // best-validation parameters
  /// Every dataset index that appeared in a training batch, sorted.
  std::vector<std::size_t> trained_indices;
  std::vector<std::size_t> validation_indices;
};

ModelConfig model_config_for(const WindowedDataset& dataset, const HyperparamPoint& hp, const TrainConfig& cfg);
LearningRates learning_rates_for(const HyperparamPoint& hp, const TrainConfig& cfg);

/// Mean squared error of `params` over `indices` (standardized units).
double dataset_mse(const ModelParams& params, const WindowedDataset& dataset, std::span<const std::size_t> indices);
std::vector<double> predict_indices(const ModelParams& params, const WindowedDataset& dataset,
                                    std::span<const std::size_t> indices);

struct BatchGradient {
  double loss = 0.0;
  ModelParams grads;
};
/// Loss and parameter gradients of mse over one mini-batch.
BatchGradient batch_gradient(const ModelParams& params, const WindowedDataset& dataset,
                             std::span<const std::size_t> batch);

/// Splits chronologically-ordered training indices into (fit, validation).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> carve_validation(std::vector<std::size_t> train,
                                                                              double fraction);

/// Mini-batch training with early stopping on split.train. The returned
/// report holds the best-validation parameters.
TrainReport train(const WindowedDataset& dataset, const SplitSpec& split, const HyperparamPoint& hp,
                  const TrainConfig& cfg);
/// Same, starting from given parameters.
TrainReport train_from(ModelParams initial, const WindowedDataset& dataset, const SplitSpec& split,
                       const LearningRates& rates, const TrainConfig& cfg);

/// Predictions and actuals in original (de-standardized) units.
EvalReport evaluate_model(const ModelParams& params, const WindowedDataset& dataset,
                          std::span<const std::size_t> indices);

struct CrossValidationReport {
  std::vector<EvalReport> folds;
  EvalReport mean;
  EvalReport std;  // population std per metric
};
/// fold_runner(train indices, held-out indices) -> predictions for the held-out indices.
using FoldRunner = std::function<std::vector<double>(const std::vector<std::size_t>&, const std::vector<std::size_t>&)>;
CrossValidationReport cross_validate(const WindowedDataset& dataset, const SplitSpec& folds, const FoldRunner& runner);
CrossValidationReport cross_validate(const WindowedDataset& dataset, const SplitSpec& folds, const HyperparamPoint& hp,
                                     const TrainConfig& cfg);

struct GridCell {
  double learning_rate = 0.001;
  std::size_t batch_size = 64;
  std::size_t layers = 6;
  friend bool operator==(const GridCell&, const GridCell&) = default;
};
struct GridRow {
  GridCell cell;
  double validation_loss = 0.0;
};
/// {0.001, 0.0001} x {32, 64} x {4, 6}.
std::vector<GridCell> default_grid();
/// Trains each distinct cell (lr for both components, batch size, encoder
/// layers) with `cfg`, scoring by best validation loss. Sorted ascending;
/// ties keep grid order.
std::vector<GridRow> grid_search(const WindowedDataset& dataset, const SplitSpec& split, std::vector<GridCell> grid,
                                 const HyperparamPoint& base, const TrainConfig& cfg);

struct SearchResult {
  HyperparamPoint best;
  std::vector<double> best_position;
  double best_value = 0.0;
  std::vector<double> history;
};
/// Fitness of a candidate; receives the decoded point and its raw position.
using HyperparamFitness = std::function<double(const HyperparamPoint&, std::span<const double>)>;
SearchResult pso_hyperparameter_search(const SearchRanges& ranges, pso::SwarmConfig swarm,
                                       const HyperparamFitness& fitness);
/// Fitness = best validation MSE after training for `proxy.epochs` epochs.
SearchResult pso_hyperparameter_search(const WindowedDataset& dataset, const SplitSpec& split,
                                       const SearchRanges& ranges, pso::SwarmConfig swarm, const TrainConfig& proxy);

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'L', 'T', 'P', 'N', 'E', 'T', 'C', 'K'};

/// Layout: 8-byte magic, u32 version, u64 header length, JSON header
/// (config, tensor manifest, provenance), little-endian f64 payload in
/// manifest order.
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path, const std::string& provenance = "");
ModelParams load_checkpoint(const std::filesystem::path& path);
std::string checkpoint_header(const ModelParams& params, const std::string& provenance = "");

}  // namespace ltpnet
