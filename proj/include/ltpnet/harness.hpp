#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ltpnet/hyperparams.hpp"
#include "ltpnet/metrics.hpp"
#include "ltpnet/model.hpp"
#include "ltpnet/optim.hpp"
#include "ltpnet/preprocessing.hpp"
#include "ltpnet/pso.hpp"
#include "ltpnet/training.hpp"

namespace ltpnet {

/// Version string of this build, e.g. "0.1.0+g1a2b3c4".
std::string artifact_version();

/// Suite-level worker count: LTPNET_THREADS when set to a positive integer,
/// otherwise the number of hardware threads.
std::size_t suite_threads();

enum class Variant { full, no_lstm, no_transformer, no_pso };
enum class HyperparamSource { fixed, pso_search, grid_search };

std::string to_string(Variant v);
std::string to_string(HyperparamSource s);
Variant variant_from_string(const std::string& name);
HyperparamSource hyperparam_source_from_string(const std::string& name);

struct CsvSource {
  std::filesystem::path path;
  /// Columns to read (kept in file order). Empty: every column of the file.
  std::vector<std::string> columns;
  std::string target;
};

struct Seeds {
  std::uint64_t data = 0;
  std::uint64_t init = 1;
  std::uint64_t shuffle = 2;
  std::uint64_t swarm = 3;

  /// data = s, init = s + 1, shuffle = s + 2, swarm = s + 3.
  static Seeds from_base(std::uint64_t s) { return {s, s + 1, s + 2, s + 3}; }
  friend bool operator==(const Seeds&, const Seeds&) = default;
};

struct TrainingSettings {
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  std::size_t iterations_per_epoch = 1000;
  std::size_t patience = 10;
  double min_delta = 1e-9;
  /// One rate for every component; unset means the hyperparameter point's
  /// per-component rates (SGD) or 0.001 (Adam, adaptive momentum).
  std::optional<double> learning_rate;
  std::size_t lstm_layers = 2;
  std::size_t head_width = 64;
  std::size_t d_ff_multiplier = 4;
  double clip_norm = 5.0;
  double validation_fraction = 0.15;
  MomentumSettings momentum;
};

struct SearchSettings {
  std::size_t particles = 50;
  std::size_t iterations = 100;
  double inertia = 0.5;
  double cognitive = 1.0;
  double social = 1.0;
  pso::InertiaSchedule schedule = pso::InertiaSchedule::constant;
  /// Epochs each candidate is trained for when scored.
  std::size_t proxy_epochs = 5;
  std::size_t threads = 1;
  SearchRanges ranges;
  std::vector<GridCell> grid = default_grid();
};

struct TimingSettings {
  std::size_t repetitions = 20;
  std::size_t warmup = 2;
};

struct ExperimentSpec {
  std::string name = "experiment";
  std::optional<CsvSource> csv;
  std::optional<SyntheticSpec> synthetic;
  ImputeStrategy impute = ImputeStrategy::mean;
  bool drop_outliers = true;
  std::size_t lookback = 24;
  std::size_t horizon = 1;
  double train_ratio = 0.7;
  /// Model inputs. Empty: every loaded column, target included.
  std::vector<std::string> features;
  Variant variant = Variant::full;
  OptimizerKind optimizer = OptimizerKind::sgd;
  HyperparamSource hyperparams_source = HyperparamSource::fixed;
  /// Used by the fixed source (and by no-pso) instead of the defaults.
  std::optional<HyperparamPoint> hyperparams;
  TrainingSettings training;
  SearchSettings search;
  TimingSettings timing;
  Seeds seeds;
  std::filesystem::path output_dir = "ltpnet_out";

  /// Throws ConfigError unless exactly one dataset source is set and every
  /// numeric setting is in range.
  void validate() const;
};

/// Parses the JSON spec format; relative CSV paths resolve against `base_dir`.
ExperimentSpec parse_spec(const std::string& json_text, const std::filesystem::path& base_dir = {});
ExperimentSpec load_spec(const std::filesystem::path& path);
/// Canonical JSON. With `include_output_dir` false the echo carries no
/// location, so identical experiments serialize identically.
std::string spec_to_json(const ExperimentSpec& spec, bool include_output_dir = true);

struct IndexAudit {
  std::vector<std::size_t> test_indices;
  std::vector<std::size_t> trained_indices;
  std::vector<std::size_t> validation_indices;
  /// Test indices seen by any training batch or by validation.
  std::vector<std::size_t> leaked;
  bool clean() const { return leaked.empty(); }
};

struct TrainSummary {
  std::size_t stopped_epoch = 0;
  std::size_t best_epoch = 0;
  double initial_train_mse = 0.0;
  double final_train_mse = 0.0;
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
};

struct SearchSummary {
  bool ran = false;
  double best_value = 0.0;
  std::vector<double> history;  // PSO global best per iteration, or sorted grid losses
};

struct RunReport {
  ExperimentSpec spec;
  std::string version;
  HyperparamPoint hyperparams;
  ModelConfig model;
  std::size_t batch_size = 0;
  LearningRates learning_rates;
  TrainSummary train;
  SearchSummary search;
  EvalReport eval;
  EfficiencyReport efficiency;
  IndexAudit audit;
};

/// ingest -> preprocess -> optional search -> train -> evaluate on the test
/// split. Writes reports/, checkpoints/ and histories/ under spec.output_dir.
RunReport run_experiment(const ExperimentSpec& spec);

/// Full report JSON; `include_run_details` adds timings and the output path.
std::string report_to_json(const RunReport& report, bool include_run_details = true);
/// Structural check of a report JSON document. Returns one message per
/// problem; empty when the document conforms.
std::vector<std::string> check_report_schema(const std::string& json_text);

struct TableRow {
  std::string label;
  EvalReport eval;
};

struct AblationResult {
  /// Row order: Transformer+PSO, LSTM+PSO, LSTM+Transformer, ALL(LTP-Net).
  std::vector<RunReport> reports;
  std::vector<TableRow> table;
  /// Full variant's test MSE is at most every ablation's.
  bool full_is_best = false;
};

inline constexpr const char* kMetricsHeader = "model,MAE,MAPE,RMSE,MSE";

/// Runs no-lstm, no-transformer, no-pso and full with the base spec's data
/// and seeds, each into its own subdirectory, and writes ablation_table.csv.
AblationResult run_ablation_suite(const ExperimentSpec& base);
std::string metrics_table_csv(const std::vector<TableRow>& rows);

struct ComparisonRow {
  std::string optimizer;
  EfficiencyReport efficiency;
  EvalReport eval;
};
struct ComparisonResult {
  std::vector<RunReport> reports;
  std::vector<ComparisonRow> table;
};

inline constexpr const char* kComparisonHeader =
    "optimizer,parameters,flops,inference_ms,training_s,MAE,MAPE,RMSE,MSE";

/// Adam (lr 0.001, batch 64), adaptive momentum (mu0 0.9, rate 0.1, lr 0.001,
/// batch 64) and SGD with PSO-searched hyperparameters, all on the full model.
ComparisonResult run_optimizer_comparison(const ExperimentSpec& base);
std::string comparison_table_csv(const std::vector<ComparisonRow>& rows);

struct PsoStudySpec {
  std::string objective = "sphere";
  std::size_t dimension = 5;
  /// Symmetric bound; unset: 5 for sphere, 5.12 for rastrigin.
  std::optional<double> bound;
  std::size_t runs = 10;
  std::uint64_t base_seed = 0;
  pso::SwarmConfig swarm;  // bounds, schedule and seed are set per run
  std::vector<pso::InertiaSchedule> configs{pso::InertiaSchedule::constant, pso::InertiaSchedule::linear};
  /// When non-empty, pso_runs.csv, pso_histories.csv and pso_summary.json go here.
  std::filesystem::path output_dir;
};

struct PsoConfigSummary {
  std::string config;  // "static" or "dynamic"
  std::vector<std::uint64_t> run_seeds;
  std::vector<double> best_values;
  std::vector<std::vector<double>> histories;
  double mean = 0.0;
  double median = 0.0;
  double std = 0.0;  // population
};

/// Objective by name ("sphere", "rastrigin"); ConfigError otherwise.
pso::Objective objective_by_name(const std::string& name, std::size_t dimension);
/// Run r of every config uses seed base_seed + r, so configs are paired.
std::vector<PsoConfigSummary> run_pso_distribution_study(const PsoStudySpec& spec);

struct GradCheckResult {
  std::size_t seeds = 0;
  std::size_t checked_entries = 0;
  double max_relative_error = 0.0;
};
/// Central-difference check of the composed model's MSE gradient on the
/// small configuration (F 2, L 6, H 4, d_model 8, 2 heads, 1 layer).
GradCheckResult run_gradient_check(std::size_t seeds = 20, double step = 1e-5);

}  // namespace ltpnet
