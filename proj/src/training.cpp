#include "ltpnet/training.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <tuple>

#include <json.hpp>

#include "ltpnet/errors.hpp"

namespace ltpnet {

using nlohmann::json;

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (iterations_per_epoch == 0) throw ConfigError("iterations per epoch must be positive");
  if (patience == 0) throw ConfigError("early-stopping patience must be at least 1");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) throw ConfigError("validation fraction must lie in [0, 1)");
  if (!(clip_norm > 0.0)) throw ConfigError("clip norm must be positive");
  if (uniform_learning_rate && !(*uniform_learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
}

EarlyStopping::EarlyStopping(std::size_t patience, double min_delta)
    : patience_(patience), min_delta_(min_delta), best_loss_(std::numeric_limits<double>::infinity()) {}

bool EarlyStopping::observe(double loss) {
  ++epoch_;
  if (loss < best_loss_ - min_delta_) {
    best_loss_ = loss;
    best_epoch_ = epoch_;
    stale_ = 0;
    return true;
  }
  ++stale_;
  return false;
}

ModelConfig model_config_for(const WindowedDataset& dataset, const HyperparamPoint& hp, const TrainConfig& cfg) {
  auto c = ModelConfig::from_hyperparams(hp, dataset.feature_count(), dataset.lookback, cfg.lstm_layers, cfg.head_width,
                                         cfg.d_ff_multiplier);
  c.lstm_enabled = cfg.lstm_enabled;
  c.transformer_enabled = cfg.transformer_enabled;
  return c;
}

LearningRates learning_rates_for(const HyperparamPoint& hp, const TrainConfig& cfg) {
  if (cfg.uniform_learning_rate) return {*cfg.uniform_learning_rate, *cfg.uniform_learning_rate};
  return {hp.lstm_learning_rate, hp.transformer_learning_rate};
}

std::vector<double> predict_indices(const ModelParams& params, const WindowedDataset& dataset,
                                    std::span<const std::size_t> indices) {
  std::vector<double> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(predict_window(dataset.window(i), params));
  return out;
}

double dataset_mse(const ModelParams& params, const WindowedDataset& dataset, std::span<const std::size_t> indices) {
  if (indices.empty()) throw DataError("dataset_mse: no indices");
  double sum = 0.0;
  for (auto i : indices) {
    const double e = predict_window(dataset.window(i), params) - dataset.targets[i];
    sum += e * e;
  }
  return sum / static_cast<double>(indices.size());
}

BatchGradient batch_gradient(const ModelParams& params, const WindowedDataset& dataset,
                             std::span<const std::size_t> batch) {
  if (batch.empty()) throw DataError("batch_gradient: empty batch");
  BatchGradient out{0.0, zero_gradients_like(params)};
  const double n = static_cast<double>(batch.size());
  for (auto i : batch) {
    auto fwd = forward_full(dataset.window(i), params);
    const double e = fwd.prediction - dataset.targets[i];
    out.loss += e * e / n;
    backward_full(fwd.cache, params, 2.0 * e / n, out.grads);
  }
  return out;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> carve_validation(std::vector<std::size_t> train,
                                                                              double fraction) {
  std::sort(train.begin(), train.end());
  if (train.size() < 2 || fraction <= 0.0) return {std::move(train), {}};
  auto n_val = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(train.size())));
  n_val = std::clamp<std::size_t>(n_val, 1, train.size() - 1);
  std::vector<std::size_t> val(train.end() - static_cast<std::ptrdiff_t>(n_val), train.end());
  train.resize(train.size() - n_val);
  return {std::move(train), std::move(val)};
}

TrainReport train_from(ModelParams initial, const WindowedDataset& dataset, const SplitSpec& split,
                       const LearningRates& rates, const TrainConfig& cfg) {
  cfg.validate();
  if (split.train.empty()) throw DataError("train: empty training split");
  for (auto i : split.train)
    if (i >= dataset.size()) throw DataError("train: split index out of range");

  const auto start = std::chrono::steady_clock::now();
  auto [fit, val] = carve_validation(split.train, cfg.validation_fraction);

  TrainReport report;
  report.validation_indices = val;
  ModelParams params = std::move(initial);
  Optimizer optimizer(cfg.optimizer, rates, cfg.adam, cfg.momentum);
  SeededRng shuffler(cfg.shuffle_seed);
  EarlyStopping stopping(cfg.patience, cfg.min_delta);
  std::set<std::size_t> trained;

  report.initial_train_mse = dataset_mse(params, dataset, fit);
  ModelParams best = params;

  const std::size_t batch = cfg.batch_size;
  const std::size_t batches = (fit.size() + batch - 1) / batch;
  const std::size_t iterations = std::min(cfg.iterations_per_epoch, batches);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto order = fit;
    shuffler.shuffle(order);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t it = 0; it < iterations; ++it) {
      const std::size_t lo = it * batch;
      const std::size_t hi = std::min(lo + batch, order.size());
      const std::span<const std::size_t> members(order.data() + lo, hi - lo);
      auto bg = batch_gradient(params, dataset, members);
      clip_global_norm(bg.grads, cfg.clip_norm);
      optimizer.step(params, bg.grads);
      loss_sum += bg.loss * static_cast<double>(members.size());
      seen += members.size();
      trained.insert(members.begin(), members.end());
    }
    optimizer.end_epoch();
    const double train_loss = loss_sum / static_cast<double>(seen);
    report.train_loss.push_back(train_loss);
    const double val_loss = val.empty() ? train_loss : dataset_mse(params, dataset, val);
    report.validation_loss.push_back(val_loss);
    if (stopping.observe(val_loss)) best = params;
    if (stopping.should_stop()) break;
  }

  report.stopped_epoch = stopping.epochs_seen();
  report.best_epoch = stopping.best_epoch();
  report.final_train_mse = report.stopped_epoch ? dataset_mse(best, dataset, fit) : report.initial_train_mse;
  report.params = std::move(best);
  report.trained_indices.assign(trained.begin(), trained.end());
  report.training_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

TrainReport train(const WindowedDataset& dataset, const SplitSpec& split, const HyperparamPoint& hp,
                  const TrainConfig& cfg) {
  if (dataset.size() == 0) throw DataError("train: empty dataset");
  SeededRng init(cfg.init_seed);
  auto params = ModelParams::random(model_config_for(dataset, hp, cfg), init);
  return train_from(std::move(params), dataset, split, learning_rates_for(hp, cfg), cfg);
}

EvalReport evaluate_model(const ModelParams& params, const WindowedDataset& dataset,
                          std::span<const std::size_t> indices) {
  std::vector<double> pred, actual;
  for (auto i : indices) {
    pred.push_back(dataset.destandardize_target(predict_window(dataset.window(i), params)));
    actual.push_back(dataset.destandardize_target(dataset.targets[i]));
  }
  return evaluate(pred, actual);
}

namespace {

CrossValidationReport summarize(std::vector<EvalReport> folds) {
  CrossValidationReport r;
  r.folds = std::move(folds);
  const double k = static_cast<double>(r.folds.size());
  const auto mean_std = [&](auto get) {
    double m = 0.0;
    for (const auto& f : r.folds) m += get(f);
    m /= k;
    double s = 0.0;
    for (const auto& f : r.folds) s += (get(f) - m) * (get(f) - m);
    return std::pair{m, std::sqrt(s / k)};
  };
  std::tie(r.mean.mae, r.std.mae) = mean_std([](const EvalReport& e) { return e.mae; });
  std::tie(r.mean.rmse, r.std.rmse) = mean_std([](const EvalReport& e) { return e.rmse; });
  std::tie(r.mean.mse, r.std.mse) = mean_std([](const EvalReport& e) { return e.mse; });
  std::vector<double> mapes;
  for (const auto& f : r.folds)
    if (f.mape) mapes.push_back(*f.mape);
  if (!mapes.empty()) {
    r.mean.mape = mean_of(mapes);
    r.std.mape = population_std(mapes);
  }
  for (const auto& f : r.folds) {
    r.mean.n += f.n;
    r.mean.skipped_mape_points += f.skipped_mape_points;
  }
  return r;
}

}  // namespace

CrossValidationReport cross_validate(const WindowedDataset& dataset, const SplitSpec& folds, const FoldRunner& runner) {
  if (folds.folds.size() < 2) throw DataError("cross_validate: at least two folds are required");
  std::vector<EvalReport> reports;
  for (std::size_t k = 0; k < folds.folds.size(); ++k) {
    std::vector<std::size_t> train;
    for (std::size_t j = 0; j < folds.folds.size(); ++j)
      if (j != k) train.insert(train.end(), folds.folds[j].begin(), folds.folds[j].end());
    std::sort(train.begin(), train.end());
    const auto& held = folds.folds[k];
    if (held.empty()) throw DataError("cross_validate: empty fold");
    const auto pred = runner(train, held);
    if (pred.size() != held.size()) throw ShapeError("cross_validate: runner returned wrong prediction count");
    std::vector<double> p, a;
    for (std::size_t i = 0; i < held.size(); ++i) {
      p.push_back(dataset.destandardize_target(pred[i]));
      a.push_back(dataset.destandardize_target(dataset.targets[held[i]]));
    }
    reports.push_back(evaluate(p, a));
  }
  return summarize(std::move(reports));
}

CrossValidationReport cross_validate(const WindowedDataset& dataset, const SplitSpec& folds, const HyperparamPoint& hp,
                                     const TrainConfig& cfg) {
  return cross_validate(dataset, folds, [&](const std::vector<std::size_t>& train_idx, const std::vector<std::size_t>& held) {
    SplitSpec split{train_idx, held, {}};
    const auto report = train(dataset, split, hp, cfg);
    return predict_indices(report.params, dataset, held);
  });
}

std::vector<GridCell> default_grid() {
  std::vector<GridCell> grid;
  for (double lr : {0.001, 0.0001})
    for (std::size_t batch : {32, 64})
      for (std::size_t layers : {4, 6}) grid.push_back({lr, batch, layers});
  return grid;
}

std::vector<GridRow> grid_search(const WindowedDataset& dataset, const SplitSpec& split, std::vector<GridCell> grid,
                                 const HyperparamPoint& base, const TrainConfig& cfg) {
  if (grid.empty()) throw ConfigError("grid_search: empty grid");
  std::vector<GridCell> cells;
  for (const auto& c : grid)
    if (std::find(cells.begin(), cells.end(), c) == cells.end()) cells.push_back(c);

  std::vector<GridRow> rows;
  for (const auto& cell : cells) {
    HyperparamPoint hp = base;
    hp.lstm_learning_rate = cell.learning_rate;
    hp.transformer_learning_rate = cell.learning_rate;
    hp.transformer_layers = cell.layers;
    TrainConfig c = cfg;
    c.batch_size = cell.batch_size;
    const auto report = train(dataset, split, hp, c);
    const double best = report.validation_loss.empty()
                            ? report.initial_train_mse
                            : *std::min_element(report.validation_loss.begin(), report.validation_loss.end());
    rows.push_back({cell, best});
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const GridRow& a, const GridRow& b) { return a.validation_loss < b.validation_loss; });
  return rows;
}

SearchResult pso_hyperparameter_search(const SearchRanges& ranges, pso::SwarmConfig swarm,
                                       const HyperparamFitness& fitness) {
  pso::hyperparam_bounds(ranges, swarm.lower, swarm.upper);
  pso::Objective objective{pso::kHyperparamAxes,
                           [&](std::span<const double> x) { return fitness(pso::decode_position(x, ranges), x); },
                           "hyperparameter fitness"};
  const auto result = pso::run(swarm, objective);
  return {pso::decode_position(result.best_position, ranges), result.best_position, result.best_value, result.history};
}

SearchResult pso_hyperparameter_search(const WindowedDataset& dataset, const SplitSpec& split,
                                       const SearchRanges& ranges, pso::SwarmConfig swarm, const TrainConfig& proxy) {
  return pso_hyperparameter_search(ranges, std::move(swarm), [&](const HyperparamPoint& hp, std::span<const double>) {
    const auto report = train(dataset, split, hp, proxy);
    if (report.validation_loss.empty()) return report.initial_train_mse;
    return *std::min_element(report.validation_loss.begin(), report.validation_loss.end());
  });
}

// --- checkpoints ---

namespace {

json config_to_json(const ModelConfig& c) {
  return {{"input_features", c.input_features}, {"lookback", c.lookback},     {"lstm_hidden", c.lstm_hidden},
          {"lstm_layers", c.lstm_layers},       {"d_model", c.d_model},       {"heads", c.heads},
          {"encoder_layers", c.encoder_layers}, {"d_ff", c.d_ff},             {"head_width", c.head_width},
          {"lstm_enabled", c.lstm_enabled},     {"transformer_enabled", c.transformer_enabled}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.input_features = j.at("input_features");
  c.lookback = j.at("lookback");
  c.lstm_hidden = j.at("lstm_hidden");
  c.lstm_layers = j.at("lstm_layers");
  c.d_model = j.at("d_model");
  c.heads = j.at("heads");
  c.encoder_layers = j.at("encoder_layers");
  c.d_ff = j.at("d_ff");
  c.head_width = j.at("head_width");
  c.lstm_enabled = j.at("lstm_enabled");
  c.transformer_enabled = j.at("transformer_enabled");
  return c;
}

template <class T>
void write_le(std::ostream& out, T value) {
  auto bits = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
  out.write(reinterpret_cast<const char*>(bits.data()), sizeof(T));
}

template <class T>
T read_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bits{};
  if (!in.read(reinterpret_cast<char*>(bits.data()), sizeof(T))) throw FormatError("checkpoint is truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
  return std::bit_cast<T>(bits);
}

}  // namespace

std::string checkpoint_header(const ModelParams& params, const std::string& provenance) {
  json manifest = json::array();
  for (const auto& ref : parameter_tensors(params)) manifest.push_back({{"name", ref.name}, {"shape", ref.tensor->shape()}});
  json header = {{"format", "ltpnet-checkpoint"},
                 {"version", kCheckpointVersion},
                 {"config", config_to_json(params.config)},
                 {"tensors", manifest},
                 {"provenance", provenance}};
  return header.dump();
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path, const std::string& provenance) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write checkpoint " + path.string());
  const std::string header = checkpoint_header(params, provenance);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  write_le<std::uint32_t>(out, kCheckpointVersion);
  write_le<std::uint64_t>(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto& ref : parameter_tensors(params))
    for (double v : ref.tensor->data()) write_le<double>(out, v);
  if (!out) throw FormatError("failed writing checkpoint " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  char magic[sizeof(kCheckpointMagic)];
  if (!in.read(magic, sizeof(magic))) throw FormatError("checkpoint is truncated");
  if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw FormatError("not an ltpnet checkpoint (bad magic) or unsupported version");
  const auto version = read_le<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  const auto header_len = read_le<std::uint64_t>(in);
  if (header_len > (1ULL << 32)) throw FormatError("checkpoint header length is implausible");
  std::string header(header_len, '\0');
  if (!in.read(header.data(), static_cast<std::streamsize>(header_len))) throw FormatError("checkpoint is truncated");

  json j;
  try {
    j = json::parse(header);
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  ModelParams params = ModelParams::zeros(config_from_json(j.at("config")));
  auto refs = parameter_tensors(params);
  const auto& manifest = j.at("tensors");
  if (manifest.size() != refs.size()) throw FormatError("checkpoint manifest does not match its config");
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (manifest[i].at("name") != refs[i].name ||
        manifest[i].at("shape").get<std::vector<std::size_t>>() != refs[i].tensor->shape())
      throw FormatError("checkpoint tensor " + refs[i].name + " does not match the manifest");
    for (double& v : refs[i].tensor->data()) v = read_le<double>(in);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("checkpoint has trailing bytes");
  return params;
}

}  // namespace ltpnet
