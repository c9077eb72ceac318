#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ltpnet/rng.hpp"
#include "ltpnet/tensor.hpp"

namespace ltpnet {

/// Column-oriented table of optional reals. An empty optional is a missing cell.
struct RawTable {
  std::vector<std::string> names;
  std::vector<std::vector<std::optional<double>>> columns;

  std::size_t row_count() const { return columns.empty() ? 0 : columns.front().size(); }
  std::size_t column_count() const { return names.size(); }
  std::size_t column_index(const std::string& name) const;
  std::size_t missing_count() const;

  /// Throws DataError when column lengths differ or names repeat.
  void validate() const;

  static RawTable from_columns(std::vector<std::string> names,
                               const std::vector<std::vector<double>>& columns);
};

struct ColumnStats {
  double mean = 0.0;
  double std = 1.0;
};

/// Supervised windows. features has shape N x L x F.
struct WindowedDataset {
  Tensor features;
  std::vector<double> targets;
  std::size_t lookback = 0;
  std::size_t horizon = 1;
  std::vector<std::string> feature_names;
  std::vector<ColumnStats> feature_stats;
  ColumnStats target_stats;
  /// Source row of each window's first feature row and of its target.
  std::vector<std::size_t> window_start;
  std::vector<std::size_t> target_row;

  std::size_t size() const { return targets.size(); }
  std::size_t feature_count() const { return feature_names.size(); }
  /// Copies window i out as an L x F matrix.
  Tensor window(std::size_t i) const;
  double destandardize_target(double v) const { return v * target_stats.std + target_stats.mean; }
};

struct SplitSpec {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  /// Optional fold partition over `train` (fold k holds original indices).
  std::vector<std::vector<std::size_t>> folds;
};

enum class ImputeStrategy { mean, median };

struct ImputeLog {
  std::vector<double> missing_rate;  // per column, before filling
};

RawTable load_csv(const std::filesystem::path& path,
                  const std::vector<std::string>& expected_columns = {});
void write_csv(const RawTable& table, const std::filesystem::path& path);

RawTable impute_missing(const RawTable& table, ImputeStrategy strategy,
                        ImputeLog* log = nullptr);

struct OutlierResult {
  RawTable table;
  std::vector<std::size_t> removed_rows;
};
/// Drops rows with any value strictly outside mean +/- 3 std (population,
/// computed once on the input). Zero-std columns exclude nothing.
OutlierResult remove_outliers(const RawTable& table);

struct StandardizeResult {
  RawTable table;
  std::vector<ColumnStats> stats;
};
/// Z-scores every column with statistics of all rows.
StandardizeResult standardize(const RawTable& table);
/// Statistics of rows [0, fit_rows), applied to every row.
StandardizeResult standardize_fitted(const RawTable& table, std::size_t fit_rows);
RawTable apply_standardization(const RawTable& table, const std::vector<ColumnStats>& stats);
RawTable inverse_standardization(const RawTable& table, const std::vector<ColumnStats>& stats);

struct WindowOptions {
  std::string target;
  std::vector<std::string> features;  // empty: every column
  std::size_t lookback = 24;
  std::size_t horizon = 1;
};
WindowedDataset make_windows(const RawTable& table, const WindowOptions& options,
                             const std::vector<ColumnStats>& stats = {});

SplitSpec split_train_test(std::size_t n, double ratio = 0.7);
/// Assigns a seeded permutation of `train` round-robin to k folds.
SplitSpec kfold_split(const std::vector<std::size_t>& train, std::size_t k, SeededRng& rng);

struct SyntheticSpec {
  std::size_t length = 400;
  std::size_t feature_count = 3;
  double period = 12.0;
  double trend_slope = 0.0;
  double noise_std = 0.0;
  double amplitude = 1.0;
  std::uint64_t seed = 0;
};
/// Column "target" = slope*t + amplitude*sin(2 pi t / period) + noise; columns
/// "f1".."fK" are phase-shifted, rescaled copies of the seasonal signal plus
/// independent noise.
RawTable synthesize_series(const SyntheticSpec& spec);

struct PreprocessOptions {
  ImputeStrategy impute = ImputeStrategy::mean;
  bool drop_outliers = true;
  WindowOptions windows;
  double train_ratio = 0.7;
};

struct PreparedData {
  WindowedDataset dataset;
  SplitSpec split;
  ImputeLog impute_log;
  std::vector<std::size_t> removed_rows;
};
/// impute -> outliers -> standardize (training rows only) -> windows -> 7:3 split.
PreparedData prepare_dataset(const RawTable& raw, const PreprocessOptions& options);

double mean_of(const std::vector<double>& values);
double population_std(const std::vector<double>& values);

}  // namespace ltpnet
