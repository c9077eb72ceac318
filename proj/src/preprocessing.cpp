#include "ltpnet/preprocessing.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

#include "ltpnet/errors.hpp"

namespace ltpnet {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::optional<double> parse_cell(const std::string& cell) {
  if (cell.empty()) return std::nullopt;
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  if (*begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::vector<double> present_values(const std::vector<std::optional<double>>& column) {
  std::vector<double> values;
  values.reserve(column.size());
  for (const auto& v : column)
    if (v) values.push_back(*v);
  return values;
}

double median_of(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<double> require_dense(const std::vector<std::optional<double>>& column,
                                  const std::string& name) {
  std::vector<double> values;
  values.reserve(column.size());
  for (const auto& v : column) {
    if (!v) throw DataError("column '" + name + "' still has missing values; impute first");
    values.push_back(*v);
  }
  return values;
}

}  // namespace

double mean_of(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double population_std(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  const double mu = mean_of(values);
  double acc = 0.0;
  for (double v : values) acc += (v - mu) * (v - mu);
  return std::sqrt(acc / static_cast<double>(values.size()));
}

std::size_t RawTable::column_index(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw DataError("unknown column '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

std::size_t RawTable::missing_count() const {
  std::size_t count = 0;
  for (const auto& column : columns)
    count += static_cast<std::size_t>(std::count(column.begin(), column.end(), std::nullopt));
  return count;
}

void RawTable::validate() const {
  if (names.size() != columns.size()) throw DataError("column name count differs from column count");
  std::set<std::string> seen;
  for (const auto& name : names)
    if (!seen.insert(name).second) throw DataError("duplicate column name '" + name + "'");
  for (const auto& column : columns)
    if (column.size() != row_count()) throw DataError("columns have unequal lengths");
}

RawTable RawTable::from_columns(std::vector<std::string> names,
                                const std::vector<std::vector<double>>& columns) {
  RawTable t;
  t.names = std::move(names);
  for (const auto& column : columns) t.columns.emplace_back(column.begin(), column.end());
  t.validate();
  return t;
}

RawTable load_csv(const std::filesystem::path& path, const std::vector<std::string>& expected_columns) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open CSV file " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw DataError("CSV file " + path.string() + " has no header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_line(line);

  std::vector<std::size_t> keep;
  if (expected_columns.empty()) {
    keep.resize(header.size());
    std::iota(keep.begin(), keep.end(), 0);
  } else {
    for (const auto& name : expected_columns) {
      if (std::find(header.begin(), header.end(), name) == header.end()) {
        throw DataError("CSV header of " + path.string() + " lacks expected column '" + name + "'");
      }
    }
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (std::find(expected_columns.begin(), expected_columns.end(), header[i]) != expected_columns.end())
        keep.push_back(i);
    }
  }

  RawTable table;
  for (auto i : keep) table.names.push_back(header[i]);
  table.columns.resize(keep.size());

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != header.size()) {
      throw DataError("ragged row at line " + std::to_string(line_no) + " of " + path.string() +
                      ": expected " + std::to_string(header.size()) + " cells, got " +
                      std::to_string(cells.size()));
    }
    for (std::size_t k = 0; k < keep.size(); ++k) table.columns[k].push_back(parse_cell(cells[keep[k]]));
  }
  table.validate();
  return table;
}

void write_csv(const RawTable& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write CSV file " + path.string());
  for (std::size_t c = 0; c < table.names.size(); ++c) out << (c ? "," : "") << table.names[c];
  out << '\n' << std::setprecision(17);
  for (std::size_t r = 0; r < table.row_count(); ++r) {
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      if (c) out << ',';
      if (const auto& v = table.columns[c][r]) out << *v;
    }
    out << '\n';
  }
}

RawTable impute_missing(const RawTable& table, ImputeStrategy strategy, ImputeLog* log) {
  RawTable out = table;
  if (log) log->missing_rate.clear();
  for (std::size_t c = 0; c < out.columns.size(); ++c) {
    auto& column = out.columns[c];
    const auto present = present_values(column);
    if (present.empty()) throw DataError("column '" + out.names[c] + "' has no present values");
    const std::size_t missing = column.size() - present.size();
    if (log) log->missing_rate.push_back(column.empty() ? 0.0 : static_cast<double>(missing) / column.size());
    if (missing == 0) continue;
    const double fill = strategy == ImputeStrategy::mean ? mean_of(present) : median_of(present);
    for (auto& v : column)
      if (!v) v = fill;
  }
  return out;
}

OutlierResult remove_outliers(const RawTable& table) {
  const std::size_t rows = table.row_count();
  std::vector<bool> drop(rows, false);
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    const auto values = require_dense(table.columns[c], table.names[c]);
    const double mu = mean_of(values);
    const double sigma = population_std(values);
    if (sigma == 0.0) continue;
    const double lo = mu - 3.0 * sigma;
    const double hi = mu + 3.0 * sigma;
    for (std::size_t r = 0; r < rows; ++r)
      if (values[r] < lo || values[r] > hi) drop[r] = true;
  }

  OutlierResult result;
  result.table.names = table.names;
  result.table.columns.resize(table.columns.size());
  for (std::size_t r = 0; r < rows; ++r) {
    if (drop[r]) {
      result.removed_rows.push_back(r);
      continue;
    }
    for (std::size_t c = 0; c < table.columns.size(); ++c)
      result.table.columns[c].push_back(table.columns[c][r]);
  }
  return result;
}

StandardizeResult standardize(const RawTable& table) { return standardize_fitted(table, table.row_count()); }

StandardizeResult standardize_fitted(const RawTable& table, std::size_t fit_rows) {
  if (fit_rows == 0 || fit_rows > table.row_count())
    throw DataError("standardize: fit rows out of range");
  StandardizeResult result;
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    auto values = require_dense(table.columns[c], table.names[c]);
    values.resize(fit_rows);
    const double sigma = population_std(values);
    if (sigma < 1e-12) throw DataError("column '" + table.names[c] + "' is constant; cannot standardize");
    result.stats.push_back({mean_of(values), sigma});
  }
  result.table = apply_standardization(table, result.stats);
  return result;
}

RawTable apply_standardization(const RawTable& table, const std::vector<ColumnStats>& stats) {
  if (stats.size() != table.columns.size()) throw DataError("standardization stats do not match columns");
  RawTable out = table;
  for (std::size_t c = 0; c < out.columns.size(); ++c)
    for (auto& v : out.columns[c])
      if (v) v = (*v - stats[c].mean) / stats[c].std;
  return out;
}

RawTable inverse_standardization(const RawTable& table, const std::vector<ColumnStats>& stats) {
  if (stats.size() != table.columns.size()) throw DataError("standardization stats do not match columns");
  RawTable out = table;
  for (std::size_t c = 0; c < out.columns.size(); ++c)
    for (auto& v : out.columns[c])
      if (v) v = *v * stats[c].std + stats[c].mean;
  return out;
}

Tensor WindowedDataset::window(std::size_t i) const {
  const std::size_t f = feature_count();
  const auto all = features.data();
  std::vector<double> values(all.begin() + static_cast<std::ptrdiff_t>(i * lookback * f),
                             all.begin() + static_cast<std::ptrdiff_t>((i + 1) * lookback * f));
  return Tensor({lookback, f}, std::move(values));
}

WindowedDataset make_windows(const RawTable& table, const WindowOptions& options,
                             const std::vector<ColumnStats>& stats) {
  if (options.lookback == 0 || options.horizon == 0) throw ConfigError("lookback and horizon must be positive");
  const std::size_t rows = table.row_count();
  if (rows < options.lookback + options.horizon) {
    throw DataError("make_windows: " + std::to_string(rows) + " rows cannot hold a lookback of " +
                    std::to_string(options.lookback) + " plus horizon " + std::to_string(options.horizon));
  }

  const auto feature_names = options.features.empty() ? table.names : options.features;
  std::vector<std::vector<double>> feature_columns;
  std::vector<ColumnStats> feature_stats;
  for (const auto& name : feature_names) {
    const auto idx = table.column_index(name);
    feature_columns.push_back(require_dense(table.columns[idx], name));
    feature_stats.push_back(stats.empty() ? ColumnStats{} : stats.at(idx));
  }
  const auto target_idx = table.column_index(options.target);
  const auto target_column = require_dense(table.columns[target_idx], options.target);

  WindowedDataset ds;
  ds.lookback = options.lookback;
  ds.horizon = options.horizon;
  ds.feature_names = feature_names;
  ds.feature_stats = std::move(feature_stats);
  ds.target_stats = stats.empty() ? ColumnStats{} : stats.at(target_idx);

  const std::size_t n = rows - options.lookback - options.horizon + 1;
  const std::size_t f = feature_names.size();
  std::vector<double> values;
  values.reserve(n * options.lookback * f);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t r = i; r < i + options.lookback; ++r)
      for (std::size_t c = 0; c < f; ++c) values.push_back(feature_columns[c][r]);
    const std::size_t t = i + options.lookback + options.horizon - 1;
    ds.targets.push_back(target_column[t]);
    ds.window_start.push_back(i);
    ds.target_row.push_back(t);
  }
  ds.features = Tensor({n, options.lookback, f}, std::move(values));
  return ds;
}

SplitSpec split_train_test(std::size_t n, double ratio) {
  if (n < 2) throw DataError("split_train_test: need at least 2 samples");
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must lie in (0, 1)");
  auto n_train = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  SplitSpec split;
  for (std::size_t i = 0; i < n; ++i) (i < n_train ? split.train : split.test).push_back(i);
  return split;
}

SplitSpec kfold_split(const std::vector<std::size_t>& train, std::size_t k, SeededRng& rng) {
  if (k < 2) throw ConfigError("kfold_split: k must be at least 2");
  if (train.size() < k) throw DataError("kfold_split: fewer training indices than folds");
  auto order = train;
  rng.shuffle(order);
  SplitSpec split;
  split.train = train;
  split.folds.resize(k);
  for (std::size_t i = 0; i < order.size(); ++i) split.folds[i % k].push_back(order[i]);
  for (auto& fold : split.folds) std::sort(fold.begin(), fold.end());
  return split;
}

RawTable synthesize_series(const SyntheticSpec& spec) {
  if (spec.length == 0) throw ConfigError("synthesize_series: length must be positive");
  if (!(spec.period > 0.0)) throw ConfigError("synthesize_series: period must be positive");
  SeededRng rng(spec.seed);
  const double omega = 2.0 * std::numbers::pi / spec.period;

  std::vector<std::string> names{"target"};
  for (std::size_t k = 1; k <= spec.feature_count; ++k) names.push_back("f" + std::to_string(k));
  std::vector<std::vector<double>> columns(names.size(), std::vector<double>(spec.length));

  for (std::size_t t = 0; t < spec.length; ++t) {
    const double time = static_cast<double>(t);
    columns[0][t] = spec.trend_slope * time + spec.amplitude * std::sin(omega * time) +
                    (spec.noise_std > 0.0 ? rng.normal(0.0, spec.noise_std) : 0.0);
    for (std::size_t k = 1; k <= spec.feature_count; ++k) {
      const double phase = static_cast<double>(k) * std::numbers::pi / 4.0;
      const double gain = 1.0 + 0.5 * static_cast<double>(k - 1);
      columns[k][t] = gain * spec.amplitude * std::sin(omega * time + phase) +
                      (spec.noise_std > 0.0 ? rng.normal(0.0, spec.noise_std) : 0.0);
    }
  }
  return RawTable::from_columns(std::move(names), columns);
}

PreparedData prepare_dataset(const RawTable& raw, const PreprocessOptions& options) {
  raw.validate();
  PreparedData out;
  RawTable table = impute_missing(raw, options.impute, &out.impute_log);
  if (options.drop_outliers) {
    auto cleaned = remove_outliers(table);
    out.removed_rows = std::move(cleaned.removed_rows);
    table = std::move(cleaned.table);
  }

  const auto& w = options.windows;
  const std::size_t rows = table.row_count();
  if (rows < w.lookback + w.horizon + 1) throw DataError("prepare_dataset: too few rows after cleaning");
  const std::size_t n_windows = rows - w.lookback - w.horizon + 1;
  out.split = split_train_test(n_windows, options.train_ratio);
  // Rows up to and including the last training target.
  const std::size_t fit_rows = out.split.train.size() + w.lookback + w.horizon - 1;

  const auto standardized = standardize_fitted(table, fit_rows);
  out.dataset = make_windows(standardized.table, w, standardized.stats);
  return out;
}

}  // namespace ltpnet
