#include "ltpnet/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iterator>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "ltpnet/errors.hpp"

#ifndef LTPNET_VERSION
#define LTPNET_VERSION "0.1.0"
#endif

namespace ltpnet {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string artifact_version() { return LTPNET_VERSION; }

std::size_t suite_threads() {
  if (const char* env = std::getenv("LTPNET_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::no_lstm: return "no-lstm";
    case Variant::no_transformer: return "no-transformer";
    case Variant::no_pso: return "no-pso";
  }
  return "unknown";
}

std::string to_string(HyperparamSource s) {
  switch (s) {
    case HyperparamSource::fixed: return "fixed";
    case HyperparamSource::pso_search: return "pso-search";
    case HyperparamSource::grid_search: return "grid-search";
  }
  return "unknown";
}

Variant variant_from_string(const std::string& name) {
  if (name == "full") return Variant::full;
  if (name == "no-lstm") return Variant::no_lstm;
  if (name == "no-transformer") return Variant::no_transformer;
  if (name == "no-pso") return Variant::no_pso;
  throw ConfigError("unknown variant '" + name + "' (expected full, no-lstm, no-transformer or no-pso)");
}

HyperparamSource hyperparam_source_from_string(const std::string& name) {
  if (name == "fixed") return HyperparamSource::fixed;
  if (name == "pso-search") return HyperparamSource::pso_search;
  if (name == "grid-search") return HyperparamSource::grid_search;
  throw ConfigError("unknown hyperparameter source '" + name + "' (expected fixed, pso-search or grid-search)");
}

namespace {

std::string schedule_name(pso::InertiaSchedule s) { return s == pso::InertiaSchedule::linear ? "dynamic" : "static"; }

pso::InertiaSchedule schedule_from_string(const std::string& name) {
  if (name == "static") return pso::InertiaSchedule::constant;
  if (name == "dynamic") return pso::InertiaSchedule::linear;
  throw ConfigError("unknown inertia schedule '" + name + "' (expected static or dynamic)");
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
  if (!out) throw FormatError("write failed for " + path.string());
}

// Runs fn(0..n-1) on up to `threads` workers. Rethrows the failure with the
// lowest index.
template <class F>
void parallel_for(std::size_t n, std::size_t threads, F&& fn) {
  std::atomic<std::size_t> next{0};
  std::mutex mutex;
  std::exception_ptr error;
  std::size_t error_index = n;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next++;
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mutex);
        if (i < error_index) {
          error_index = i;
          error = std::current_exception();
        }
      }
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(worker);
    worker();
  }
  if (error) std::rethrow_exception(error);
}

// --- spec JSON ---

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; }))
      throw ConfigError(where + ": unknown key '" + it.key() + "'");
  }
}

template <class T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  const std::string path = where + "." + key;
  if constexpr (std::is_same_v<T, bool>) {
    if (!it->is_boolean()) throw ConfigError(path + ": expected true or false");
  } else if constexpr (std::is_integral_v<T>) {
    if (!it->is_number_integer() || (!it->is_number_unsigned() && it->template get<long long>() < 0))
      throw ConfigError(path + ": expected a non-negative integer");
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!it->is_number()) throw ConfigError(path + ": expected a number");
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!it->is_string()) throw ConfigError(path + ": expected a string");
  }
  try {
    out = it->template get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

template <class T>
void read_list(const json& obj, const char* key, std::vector<T>& out, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  if (!it->is_array()) throw ConfigError(where + "." + key + ": expected an array");
  std::vector<T> values;
  for (std::size_t i = 0; i < it->size(); ++i) {
    json wrapper = json::object();
    wrapper["v"] = (*it)[i];
    T v{};
    read(wrapper, "v", v, where + "." + key + "[" + std::to_string(i) + "]");
    values.push_back(v);
  }
  out = std::move(values);
}

void read_int_range(const json& obj, const char* key, IntRange& r, const std::string& where) {
  std::vector<std::size_t> v;
  read_list(obj, key, v, where);
  if (obj.contains(key)) {
    if (v.size() != 2) throw ConfigError(where + "." + key + ": expected [min, max]");
    r = {v[0], v[1]};
  }
}

void read_real_range(const json& obj, const char* key, RealRange& r, const std::string& where) {
  std::vector<double> v;
  read_list(obj, key, v, where);
  if (obj.contains(key)) {
    if (v.size() != 2) throw ConfigError(where + "." + key + ": expected [min, max]");
    r = {v[0], v[1]};
  }
}

HyperparamPoint hyperparams_from_json(const json& j, const std::string& where) {
  check_keys(j, {"lstm_hidden", "lstm_learning_rate", "transformer_layers", "attention_heads", "d_model",
                 "transformer_learning_rate"},
             where);
  HyperparamPoint hp;
  read(j, "lstm_hidden", hp.lstm_hidden, where);
  read(j, "lstm_learning_rate", hp.lstm_learning_rate, where);
  read(j, "transformer_layers", hp.transformer_layers, where);
  read(j, "attention_heads", hp.attention_heads, where);
  read(j, "d_model", hp.d_model, where);
  read(j, "transformer_learning_rate", hp.transformer_learning_rate, where);
  return hp;
}

json hyperparams_to_json(const HyperparamPoint& hp) {
  return {{"lstm_hidden", hp.lstm_hidden},
          {"lstm_learning_rate", hp.lstm_learning_rate},
          {"transformer_layers", hp.transformer_layers},
          {"attention_heads", hp.attention_heads},
          {"d_model", hp.d_model},
          {"transformer_learning_rate", hp.transformer_learning_rate}};
}

json spec_json(const ExperimentSpec& s, bool include_output_dir) {
  json j;
  j["name"] = s.name;
  json dataset = json::object();
  if (s.csv) {
    dataset["csv"] = {{"path", s.csv->path.generic_string()}, {"columns", s.csv->columns}, {"target", s.csv->target}};
  }
  if (s.synthetic) {
    const auto& y = *s.synthetic;
    dataset["synthetic"] = {{"length", y.length},           {"features", y.feature_count}, {"period", y.period},
                            {"trend_slope", y.trend_slope}, {"noise_std", y.noise_std},    {"amplitude", y.amplitude}};
  }
  j["dataset"] = dataset;
  j["preprocess"] = {{"impute", s.impute == ImputeStrategy::median ? "median" : "mean"},
                     {"drop_outliers", s.drop_outliers},
                     {"lookback", s.lookback},
                     {"horizon", s.horizon},
                     {"train_ratio", s.train_ratio},
                     {"features", s.features}};
  j["variant"] = to_string(s.variant);
  j["optimizer"] = to_string(s.optimizer);
  j["hyperparameter_source"] = to_string(s.hyperparams_source);
  j["hyperparameters"] = s.hyperparams ? hyperparams_to_json(*s.hyperparams) : json(nullptr);
  const auto& t = s.training;
  j["training"] = {{"epochs", t.epochs},
                   {"batch_size", t.batch_size},
                   {"iterations_per_epoch", t.iterations_per_epoch},
                   {"patience", t.patience},
                   {"min_delta", t.min_delta},
                   {"learning_rate", t.learning_rate ? json(*t.learning_rate) : json(nullptr)},
                   {"lstm_layers", t.lstm_layers},
                   {"head_width", t.head_width},
                   {"d_ff_multiplier", t.d_ff_multiplier},
                   {"clip_norm", t.clip_norm},
                   {"validation_fraction", t.validation_fraction},
                   {"momentum",
                    {{"initial", t.momentum.initial},
                     {"update_rate", t.momentum.update_rate},
                     {"target", t.momentum.target}}}};
  const auto& q = s.search;
  json grid = json::array();
  for (const auto& c : q.grid)
    grid.push_back({{"learning_rate", c.learning_rate}, {"batch_size", c.batch_size}, {"layers", c.layers}});
  const auto& r = q.ranges;
  j["search"] = {{"particles", q.particles},
                 {"iterations", q.iterations},
                 {"inertia", q.inertia},
                 {"cognitive", q.cognitive},
                 {"social", q.social},
                 {"schedule", schedule_name(q.schedule)},
                 {"proxy_epochs", q.proxy_epochs},
                 {"threads", q.threads},
                 {"ranges",
                  {{"lstm_hidden", {r.lstm_hidden.min, r.lstm_hidden.max}},
                   {"lstm_learning_rate", {r.lstm_learning_rate.min, r.lstm_learning_rate.max}},
                   {"transformer_layers", {r.transformer_layers.min, r.transformer_layers.max}},
                   {"attention_heads", r.attention_heads},
                   {"d_model", r.d_model},
                   {"transformer_learning_rate", {r.transformer_learning_rate.min, r.transformer_learning_rate.max}}}},
                 {"grid", grid}};
  j["timing"] = {{"repetitions", s.timing.repetitions}, {"warmup", s.timing.warmup}};
  j["seeds"] = {{"data", s.seeds.data}, {"init", s.seeds.init}, {"shuffle", s.seeds.shuffle}, {"swarm", s.seeds.swarm}};
  if (include_output_dir) j["output_dir"] = s.output_dir.generic_string();
  return j;
}

}  // namespace

void ExperimentSpec::validate() const {
  if (csv.has_value() == synthetic.has_value())
    throw ConfigError("spec: exactly one dataset source (csv or synthetic) is required");
  if (csv) {
    if (csv->path.empty()) throw ConfigError("spec: dataset.csv.path is empty");
    if (csv->target.empty()) throw ConfigError("spec: dataset.csv.target is empty");
  }
  if (synthetic && synthetic->length == 0) throw ConfigError("spec: dataset.synthetic.length must be positive");
  if (lookback == 0) throw ConfigError("spec: preprocess.lookback must be at least 1");
  if (horizon == 0) throw ConfigError("spec: preprocess.horizon must be at least 1");
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) throw ConfigError("spec: preprocess.train_ratio must be in (0, 1)");
  if (hyperparams) {
    const auto& h = *hyperparams;
    if (h.lstm_hidden == 0 || h.transformer_layers == 0 || h.attention_heads == 0 || h.d_model == 0)
      throw ConfigError("spec: hyperparameters must be positive");
    if (h.d_model % h.attention_heads != 0)
      throw ConfigError("spec: hyperparameters.attention_heads must divide d_model");
    if (!(h.lstm_learning_rate > 0.0) || !(h.transformer_learning_rate > 0.0))
      throw ConfigError("spec: hyperparameter learning rates must be positive");
  }
  const auto& t = training;
  if (t.batch_size == 0) throw ConfigError("spec: training.batch_size must be at least 1");
  if (t.iterations_per_epoch == 0) throw ConfigError("spec: training.iterations_per_epoch must be at least 1");
  if (t.learning_rate && !(*t.learning_rate > 0.0)) throw ConfigError("spec: training.learning_rate must be positive");
  if (t.lstm_layers == 0 || t.head_width == 0 || t.d_ff_multiplier == 0)
    throw ConfigError("spec: training.lstm_layers, head_width and d_ff_multiplier must be positive");
  if (!(t.clip_norm > 0.0)) throw ConfigError("spec: training.clip_norm must be positive");
  if (!(t.validation_fraction >= 0.0 && t.validation_fraction < 1.0))
    throw ConfigError("spec: training.validation_fraction must be in [0, 1)");
  if (search.particles == 0) throw ConfigError("spec: search.particles must be at least 1");
  if (search.proxy_epochs == 0) throw ConfigError("spec: search.proxy_epochs must be at least 1");
  if (search.threads == 0) throw ConfigError("spec: search.threads must be at least 1");
  search.ranges.validate();
  if (hyperparams_source == HyperparamSource::grid_search && search.grid.empty())
    throw ConfigError("spec: search.grid is empty");
  if (timing.repetitions == 0) throw ConfigError("spec: timing.repetitions must be at least 1");
}

ExperimentSpec parse_spec(const std::string& json_text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("spec: invalid JSON: ") + e.what());
  }
  check_keys(j, {"name", "dataset", "preprocess", "variant", "optimizer", "hyperparameter_source", "hyperparameters",
                 "training", "search", "timing", "seeds", "output_dir"},
             "spec");
  ExperimentSpec s;
  read(j, "name", s.name, "spec");
  if (!j.contains("dataset")) throw ConfigError("spec: missing 'dataset'");
  const json& d = j["dataset"];
  check_keys(d, {"csv", "synthetic"}, "spec.dataset");
  if (d.size() != 1) throw ConfigError("spec.dataset: exactly one of 'csv' or 'synthetic' is required");
  if (d.contains("csv")) {
    const json& c = d["csv"];
    check_keys(c, {"path", "columns", "target"}, "spec.dataset.csv");
    CsvSource src;
    std::string path;
    read(c, "path", path, "spec.dataset.csv");
    src.path = path;
    if (!src.path.empty() && src.path.is_relative() && !base_dir.empty()) src.path = base_dir / src.path;
    read_list(c, "columns", src.columns, "spec.dataset.csv");
    read(c, "target", src.target, "spec.dataset.csv");
    s.csv = src;
  } else {
    const json& y = d["synthetic"];
    check_keys(y, {"length", "features", "period", "trend_slope", "noise_std", "amplitude"}, "spec.dataset.synthetic");
    SyntheticSpec syn;
    read(y, "length", syn.length, "spec.dataset.synthetic");
    read(y, "features", syn.feature_count, "spec.dataset.synthetic");
    read(y, "period", syn.period, "spec.dataset.synthetic");
    read(y, "trend_slope", syn.trend_slope, "spec.dataset.synthetic");
    read(y, "noise_std", syn.noise_std, "spec.dataset.synthetic");
    read(y, "amplitude", syn.amplitude, "spec.dataset.synthetic");
    s.synthetic = syn;
  }
  if (j.contains("preprocess")) {
    const json& p = j["preprocess"];
    const std::string w = "spec.preprocess";
    check_keys(p, {"impute", "drop_outliers", "lookback", "horizon", "train_ratio", "features"}, w);
    std::string impute = "mean";
    read(p, "impute", impute, w);
    if (impute == "mean")
      s.impute = ImputeStrategy::mean;
    else if (impute == "median")
      s.impute = ImputeStrategy::median;
    else
      throw ConfigError(w + ".impute: expected mean or median");
    read(p, "drop_outliers", s.drop_outliers, w);
    read(p, "lookback", s.lookback, w);
    read(p, "horizon", s.horizon, w);
    read(p, "train_ratio", s.train_ratio, w);
    read_list(p, "features", s.features, w);
  }
  std::string name;
  if (j.contains("variant")) {
    read(j, "variant", name, "spec");
    s.variant = variant_from_string(name);
  }
  if (j.contains("optimizer")) {
    read(j, "optimizer", name, "spec");
    s.optimizer = optimizer_from_string(name);
  }
  if (j.contains("hyperparameter_source")) {
    read(j, "hyperparameter_source", name, "spec");
    s.hyperparams_source = hyperparam_source_from_string(name);
  }
  if (j.contains("hyperparameters") && !j["hyperparameters"].is_null())
    s.hyperparams = hyperparams_from_json(j["hyperparameters"], "spec.hyperparameters");
  if (j.contains("training")) {
    const json& t = j["training"];
    const std::string w = "spec.training";
    check_keys(t, {"epochs", "batch_size", "iterations_per_epoch", "patience", "min_delta", "learning_rate",
                   "lstm_layers", "head_width", "d_ff_multiplier", "clip_norm", "validation_fraction", "momentum"},
               w);
    auto& o = s.training;
    read(t, "epochs", o.epochs, w);
    read(t, "batch_size", o.batch_size, w);
    read(t, "iterations_per_epoch", o.iterations_per_epoch, w);
    read(t, "patience", o.patience, w);
    read(t, "min_delta", o.min_delta, w);
    if (t.contains("learning_rate") && !t["learning_rate"].is_null()) {
      double lr = 0.0;
      read(t, "learning_rate", lr, w);
      o.learning_rate = lr;
    }
    read(t, "lstm_layers", o.lstm_layers, w);
    read(t, "head_width", o.head_width, w);
    read(t, "d_ff_multiplier", o.d_ff_multiplier, w);
    read(t, "clip_norm", o.clip_norm, w);
    read(t, "validation_fraction", o.validation_fraction, w);
    if (t.contains("momentum")) {
      const json& m = t["momentum"];
      check_keys(m, {"initial", "update_rate", "target"}, w + ".momentum");
      read(m, "initial", o.momentum.initial, w + ".momentum");
      read(m, "update_rate", o.momentum.update_rate, w + ".momentum");
      read(m, "target", o.momentum.target, w + ".momentum");
    }
  }
  if (j.contains("search")) {
    const json& q = j["search"];
    const std::string w = "spec.search";
    check_keys(q, {"particles", "iterations", "inertia", "cognitive", "social", "schedule", "proxy_epochs", "threads",
                   "ranges", "grid"},
               w);
    auto& o = s.search;
    read(q, "particles", o.particles, w);
    read(q, "iterations", o.iterations, w);
    read(q, "inertia", o.inertia, w);
    read(q, "cognitive", o.cognitive, w);
    read(q, "social", o.social, w);
    if (q.contains("schedule")) {
      read(q, "schedule", name, w);
      o.schedule = schedule_from_string(name);
    }
    read(q, "proxy_epochs", o.proxy_epochs, w);
    read(q, "threads", o.threads, w);
    if (q.contains("ranges")) {
      const json& r = q["ranges"];
      const std::string wr = w + ".ranges";
      check_keys(r, {"lstm_hidden", "lstm_learning_rate", "transformer_layers", "attention_heads", "d_model",
                     "transformer_learning_rate"},
                 wr);
      read_int_range(r, "lstm_hidden", o.ranges.lstm_hidden, wr);
      read_real_range(r, "lstm_learning_rate", o.ranges.lstm_learning_rate, wr);
      read_int_range(r, "transformer_layers", o.ranges.transformer_layers, wr);
      read_list(r, "attention_heads", o.ranges.attention_heads, wr);
      read_list(r, "d_model", o.ranges.d_model, wr);
      read_real_range(r, "transformer_learning_rate", o.ranges.transformer_learning_rate, wr);
    }
    if (q.contains("grid")) {
      if (!q["grid"].is_array()) throw ConfigError(w + ".grid: expected an array");
      o.grid.clear();
      for (std::size_t i = 0; i < q["grid"].size(); ++i) {
        const std::string wg = w + ".grid[" + std::to_string(i) + "]";
        const json& c = q["grid"][i];
        check_keys(c, {"learning_rate", "batch_size", "layers"}, wg);
        GridCell cell;
        read(c, "learning_rate", cell.learning_rate, wg);
        read(c, "batch_size", cell.batch_size, wg);
        read(c, "layers", cell.layers, wg);
        o.grid.push_back(cell);
      }
    }
  }
  if (j.contains("timing")) {
    const json& t = j["timing"];
    check_keys(t, {"repetitions", "warmup"}, "spec.timing");
    read(t, "repetitions", s.timing.repetitions, "spec.timing");
    read(t, "warmup", s.timing.warmup, "spec.timing");
  }
  if (j.contains("seeds")) {
    const json& t = j["seeds"];
    check_keys(t, {"data", "init", "shuffle", "swarm"}, "spec.seeds");
    read(t, "data", s.seeds.data, "spec.seeds");
    read(t, "init", s.seeds.init, "spec.seeds");
    read(t, "shuffle", s.seeds.shuffle, "spec.seeds");
    read(t, "swarm", s.seeds.swarm, "spec.seeds");
  }
  if (j.contains("output_dir")) {
    std::string out;
    read(j, "output_dir", out, "spec");
    s.output_dir = out;
  }
  s.validate();
  return s;
}

ExperimentSpec load_spec(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open spec file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_spec(buf.str(), path.parent_path());
}

std::string spec_to_json(const ExperimentSpec& spec, bool include_output_dir) {
  return spec_json(spec, include_output_dir).dump(2);
}

// --- single experiment ---

namespace {

PreparedData load_and_prepare(const ExperimentSpec& s) {
  RawTable raw;
  std::string target;
  if (s.csv) {
    raw = load_csv(s.csv->path, s.csv->columns);
    target = s.csv->target;
  } else {
    SyntheticSpec syn = *s.synthetic;
    syn.seed = s.seeds.data;
    raw = synthesize_series(syn);
    target = "target";
  }
  PreprocessOptions o;
  o.impute = s.impute;
  o.drop_outliers = s.drop_outliers;
  o.windows = {target, s.features, s.lookback, s.horizon};
  o.train_ratio = s.train_ratio;
  auto data = prepare_dataset(raw, o);
  if (data.split.train.empty() || data.split.test.empty())
    throw DataError("dataset yields " + std::to_string(data.dataset.size()) +
                    " windows, too few for a train/test split; lengthen the series or shorten the lookback");
  return data;
}

TrainConfig train_config_for(const ExperimentSpec& s) {
  const auto& t = s.training;
  TrainConfig c;
  c.batch_size = t.batch_size;
  c.epochs = t.epochs;
  c.iterations_per_epoch = t.iterations_per_epoch;
  c.patience = t.patience;
  c.min_delta = t.min_delta;
  c.optimizer = s.optimizer;
  if (t.learning_rate)
    c.uniform_learning_rate = t.learning_rate;
  else if (s.optimizer != OptimizerKind::sgd)
    c.uniform_learning_rate = 0.001;
  c.momentum = t.momentum;
  c.clip_norm = t.clip_norm;
  c.validation_fraction = t.validation_fraction;
  c.lstm_layers = t.lstm_layers;
  c.head_width = t.head_width;
  c.d_ff_multiplier = t.d_ff_multiplier;
  c.lstm_enabled = s.variant != Variant::no_lstm;
  c.transformer_enabled = s.variant != Variant::no_transformer;
  c.init_seed = s.seeds.init;
  c.shuffle_seed = s.seeds.shuffle;
  return c;
}

pso::SwarmConfig swarm_config_for(const ExperimentSpec& s) {
  pso::SwarmConfig c;
  c.particles = s.search.particles;
  c.iterations = s.search.iterations;
  c.inertia = s.search.inertia;
  c.cognitive = s.search.cognitive;
  c.social = s.search.social;
  c.schedule = s.search.schedule;
  c.seed = s.seeds.swarm;
  c.threads = s.search.threads;
  return c;
}

std::vector<std::size_t> sorted_unique(std::vector<std::size_t> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

json eval_json(const EvalReport& e) {
  return {{"MAE", e.mae},
          {"MAPE", e.mape ? json(*e.mape) : json(nullptr)},
          {"RMSE", e.rmse},
          {"MSE", e.mse},
          {"n", e.n},
          {"skipped_mape_points", e.skipped_mape_points}};
}

json audit_json(const IndexAudit& a) {
  return {{"test_indices", a.test_indices},
          {"trained_indices", a.trained_indices},
          {"validation_indices", a.validation_indices},
          {"leaked", a.leaked},
          {"clean", a.clean()}};
}

std::string history_csv(const TrainSummary& t) {
  std::string out = "epoch,train_loss,validation_loss\n";
  for (std::size_t e = 0; e < t.train_loss.size(); ++e) {
    out += std::to_string(e + 1) + "," + num(t.train_loss[e]) + ",";
    if (e < t.validation_loss.size()) out += num(t.validation_loss[e]);
    out += "\n";
  }
  return out;
}

void write_outputs(const RunReport& r, const TrainReport& tr, const PreparedData& data) {
  const fs::path root = r.spec.output_dir;
  write_text(root / "reports" / "run_report.json", report_to_json(r, true));
  write_text(root / "reports" / "payload.json", report_to_json(r, false));

  const auto& test = data.split.test;
  const auto pred = predict_indices(tr.params, data.dataset, test);
  std::string csv = "index,target_row,actual,predicted\n";
  for (std::size_t k = 0; k < test.size(); ++k) {
    const std::size_t i = test[k];
    csv += std::to_string(i) + "," + std::to_string(data.dataset.target_row[i]) + "," +
           num(data.dataset.destandardize_target(data.dataset.targets[i])) + "," +
           num(data.dataset.destandardize_target(pred[k])) + "\n";
  }
  write_text(root / "reports" / "predictions.csv", csv);

  fs::create_directories(root / "checkpoints");
  save_checkpoint(tr.params, root / "checkpoints" / "model.ltpck", r.spec.name + " " + r.version);

  write_text(root / "histories" / "training_history.csv", history_csv(r.train));
  if (r.search.ran) {
    std::string s = "step,value\n";
    for (std::size_t k = 0; k < r.search.history.size(); ++k)
      s += std::to_string(k + 1) + "," + num(r.search.history[k]) + "\n";
    write_text(root / "histories" / "search_history.csv", s);
  }
  write_text(root / "histories" / "index_audit.json", audit_json(r.audit).dump(2) + "\n");
}

}  // namespace

RunReport run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  RunReport r;
  r.spec = spec;
  r.version = artifact_version();

  const PreparedData data = load_and_prepare(spec);
  const WindowedDataset& ds = data.dataset;
  // Searches and training only ever see the training indices.
  const SplitSpec train_only{data.split.train, {}, {}};

  TrainConfig cfg = train_config_for(spec);
  HyperparamPoint hp = spec.hyperparams.value_or(kDefaultHyperparams);
  const bool search = spec.variant != Variant::no_pso && spec.hyperparams_source != HyperparamSource::fixed;
  if (search && spec.hyperparams_source == HyperparamSource::pso_search) {
    TrainConfig proxy = cfg;
    proxy.epochs = spec.search.proxy_epochs;
    const auto res = pso_hyperparameter_search(ds, train_only, spec.search.ranges, swarm_config_for(spec), proxy);
    hp = res.best;
    r.search = {true, res.best_value, res.history};
  } else if (search) {
    TrainConfig proxy = cfg;
    proxy.epochs = spec.search.proxy_epochs;
    proxy.uniform_learning_rate.reset();
    const auto rows = grid_search(ds, train_only, spec.search.grid, hp, proxy);
    const GridCell best = rows.front().cell;
    hp.lstm_learning_rate = hp.transformer_learning_rate = best.learning_rate;
    hp.transformer_layers = best.layers;
    cfg.batch_size = best.batch_size;
    if (cfg.uniform_learning_rate) cfg.uniform_learning_rate = best.learning_rate;
    r.search.ran = true;
    r.search.best_value = rows.front().validation_loss;
    for (const auto& row : rows) r.search.history.push_back(row.validation_loss);
  }

  r.hyperparams = hp;
  r.model = model_config_for(ds, hp, cfg);
  r.batch_size = cfg.batch_size;
  r.learning_rates = learning_rates_for(hp, cfg);

  const TrainReport tr = train(ds, train_only, hp, cfg);
  r.train = {tr.stopped_epoch, tr.best_epoch, tr.initial_train_mse, tr.final_train_mse, tr.train_loss,
             tr.validation_loss};

  r.eval = evaluate_model(tr.params, ds, data.split.test);

  r.efficiency.parameters = count_parameters(tr.params);
  r.efficiency.flops = estimate_flops(tr.params, ds.lookback);
  const Tensor probe = ds.window(data.split.test.front());
  const auto timing =
      time_run([&] { (void)predict_window(probe, tr.params); }, spec.timing.repetitions, spec.timing.warmup);
  r.efficiency.inference_ms = timing.mean_ms;
  r.efficiency.inference_ms_std = timing.std_ms;
  r.efficiency.training_seconds = tr.training_seconds;

  r.audit.test_indices = sorted_unique(data.split.test);
  r.audit.trained_indices = sorted_unique(tr.trained_indices);
  r.audit.validation_indices = sorted_unique(tr.validation_indices);
  std::vector<std::size_t> seen;
  std::set_union(r.audit.trained_indices.begin(), r.audit.trained_indices.end(), r.audit.validation_indices.begin(),
                 r.audit.validation_indices.end(), std::back_inserter(seen));
  std::set_intersection(r.audit.test_indices.begin(), r.audit.test_indices.end(), seen.begin(), seen.end(),
                        std::back_inserter(r.audit.leaked));

  write_outputs(r, tr, data);
  return r;
}

std::string report_to_json(const RunReport& r, bool include_run_details) {
  json j;
  j["version"] = r.version;
  j["spec"] = spec_json(r.spec, false);
  j["hyperparameters"] = hyperparams_to_json(r.hyperparams);
  const auto& m = r.model;
  j["model"] = {{"input_features", m.input_features}, {"lookback", m.lookback},
                {"lstm_hidden", m.lstm_hidden},       {"lstm_layers", m.lstm_layers},
                {"d_model", m.d_model},               {"heads", m.heads},
                {"encoder_layers", m.encoder_layers}, {"d_ff", m.d_ff},
                {"head_width", m.head_width},         {"lstm_enabled", m.lstm_enabled},
                {"transformer_enabled", m.transformer_enabled}};
  j["training"] = {{"optimizer", to_string(r.spec.optimizer)},
                   {"batch_size", r.batch_size},
                   {"learning_rates", {{"lstm", r.learning_rates.lstm}, {"transformer", r.learning_rates.transformer}}},
                   {"stopped_epoch", r.train.stopped_epoch},
                   {"best_epoch", r.train.best_epoch},
                   {"initial_train_mse", r.train.initial_train_mse},
                   {"final_train_mse", r.train.final_train_mse},
                   {"train_loss", r.train.train_loss},
                   {"validation_loss", r.train.validation_loss}};
  j["search"] = {{"ran", r.search.ran}, {"best_value", r.search.best_value}, {"history", r.search.history}};
  j["evaluation"] = eval_json(r.eval);
  json eff = {{"parameters", r.efficiency.parameters}, {"flops", r.efficiency.flops}};
  if (include_run_details) {
    eff["inference_ms"] = r.efficiency.inference_ms;
    eff["inference_ms_std"] = r.efficiency.inference_ms_std;
    eff["training_seconds"] = r.efficiency.training_seconds;
  }
  j["efficiency"] = eff;
  j["audit"] = {{"test_count", r.audit.test_indices.size()},
                {"trained_count", r.audit.trained_indices.size()},
                {"validation_count", r.audit.validation_indices.size()},
                {"leaked", r.audit.leaked},
                {"clean", r.audit.clean()}};
  if (include_run_details) j["run"] = {{"output_dir", r.spec.output_dir.generic_string()}};
  return j.dump(2) + "\n";
}

std::vector<std::string> check_report_schema(const std::string& json_text) {
  std::vector<std::string> problems;
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    return {std::string("not valid JSON: ") + e.what()};
  }
  enum Kind { string, number, integer, boolean, array, object, number_or_null };
  static const std::vector<std::pair<const char*, Kind>> required = {
      {"/version", string},
      {"/spec", object},
      {"/spec/dataset", object},
      {"/spec/variant", string},
      {"/spec/optimizer", string},
      {"/spec/hyperparameter_source", string},
      {"/spec/training/batch_size", integer},
      {"/spec/search/particles", integer},
      {"/spec/search/iterations", integer},
      {"/spec/search/inertia", number},
      {"/spec/search/cognitive", number},
      {"/spec/search/social", number},
      {"/spec/seeds", object},
      {"/hyperparameters/lstm_hidden", integer},
      {"/hyperparameters/lstm_learning_rate", number},
      {"/hyperparameters/transformer_layers", integer},
      {"/hyperparameters/attention_heads", integer},
      {"/hyperparameters/d_model", integer},
      {"/hyperparameters/transformer_learning_rate", number},
      {"/model", object},
      {"/model/lstm_enabled", boolean},
      {"/model/transformer_enabled", boolean},
      {"/training/optimizer", string},
      {"/training/batch_size", integer},
      {"/training/learning_rates/lstm", number},
      {"/training/learning_rates/transformer", number},
      {"/training/stopped_epoch", integer},
      {"/training/best_epoch", integer},
      {"/training/initial_train_mse", number},
      {"/training/final_train_mse", number},
      {"/training/train_loss", array},
      {"/training/validation_loss", array},
      {"/search/ran", boolean},
      {"/search/best_value", number},
      {"/search/history", array},
      {"/evaluation/MAE", number},
      {"/evaluation/MAPE", number_or_null},
      {"/evaluation/RMSE", number},
      {"/evaluation/MSE", number},
      {"/evaluation/n", integer},
      {"/efficiency/parameters", integer},
      {"/efficiency/flops", integer},
      {"/audit/test_count", integer},
      {"/audit/leaked", array},
      {"/audit/clean", boolean},
  };
  for (const auto& [pointer, kind] : required) {
    const json::json_pointer p(pointer);
    if (!j.contains(p)) {
      problems.push_back(std::string(pointer) + ": missing");
      continue;
    }
    const json& v = j.at(p);
    bool ok = false;
    switch (kind) {
      case string: ok = v.is_string(); break;
      case number: ok = v.is_number(); break;
      case integer: ok = v.is_number_integer(); break;
      case boolean: ok = v.is_boolean(); break;
      case array: ok = v.is_array(); break;
      case object: ok = v.is_object(); break;
      case number_or_null: ok = v.is_number() || v.is_null(); break;
    }
    if (!ok) problems.push_back(std::string(pointer) + ": wrong type");
  }
  for (const char* key : {"inference_ms", "inference_ms_std", "training_seconds"}) {
    if (j.contains("efficiency") && j["efficiency"].contains(key) && !j["efficiency"][key].is_number())
      problems.push_back(std::string("/efficiency/") + key + ": wrong type");
  }
  return problems;
}

// --- suites ---

namespace {

std::string mape_cell(const EvalReport& e) { return e.mape ? num(*e.mape) : ""; }

json table_json(const std::vector<TableRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    json row = eval_json(r.eval);
    row["model"] = r.label;
    out.push_back(row);
  }
  return out;
}

}  // namespace

std::string metrics_table_csv(const std::vector<TableRow>& rows) {
  std::string out = std::string(kMetricsHeader) + "\n";
  for (const auto& r : rows)
    out += r.label + "," + num(r.eval.mae) + "," + mape_cell(r.eval) + "," + num(r.eval.rmse) + "," + num(r.eval.mse) +
           "\n";
  return out;
}

AblationResult run_ablation_suite(const ExperimentSpec& base) {
  base.validate();
  static const std::vector<std::pair<Variant, const char*>> rows = {{Variant::no_lstm, "Transformer+PSO"},
                                                                    {Variant::no_transformer, "LSTM+PSO"},
                                                                    {Variant::no_pso, "LSTM+Transformer"},
                                                                    {Variant::full, "ALL(LTP-Net)"}};
  AblationResult result;
  result.reports.resize(rows.size());
  parallel_for(rows.size(), suite_threads(), [&](std::size_t i) {
    ExperimentSpec s = base;
    s.variant = rows[i].first;
    s.name = base.name + "/" + to_string(rows[i].first);
    s.output_dir = base.output_dir / to_string(rows[i].first);
    result.reports[i] = run_experiment(s);
  });
  for (std::size_t i = 0; i < rows.size(); ++i) result.table.push_back({rows[i].second, result.reports[i].eval});

  const double full_mse = result.table.back().eval.mse;
  result.full_is_best = std::all_of(result.table.begin(), result.table.end() - 1,
                                    [&](const TableRow& r) { return full_mse <= r.eval.mse; });
  const bool shared_test = std::all_of(result.reports.begin(), result.reports.end(), [&](const RunReport& r) {
    return r.audit.test_indices == result.reports.front().audit.test_indices;
  });
  const bool clean =
      std::all_of(result.reports.begin(), result.reports.end(), [](const RunReport& r) { return r.audit.clean(); });

  write_text(base.output_dir / "ablation_table.csv", metrics_table_csv(result.table));
  const json summary = {{"rows", table_json(result.table)},
                        {"shared_test_indices", shared_test},
                        {"audits_clean", clean},
                        {"full_mse_at_most_each_ablation", result.full_is_best}};
  write_text(base.output_dir / "ablation_summary.json", summary.dump(2) + "\n");
  return result;
}

std::string comparison_table_csv(const std::vector<ComparisonRow>& rows) {
  std::string out = std::string(kComparisonHeader) + "\n";
  for (const auto& r : rows)
    out += r.optimizer + "," + std::to_string(r.efficiency.parameters) + "," + std::to_string(r.efficiency.flops) +
           "," + num(r.efficiency.inference_ms) + "," + num(r.efficiency.training_seconds) + "," + num(r.eval.mae) +
           "," + mape_cell(r.eval) + "," + num(r.eval.rmse) + "," + num(r.eval.mse) + "\n";
  return out;
}

ComparisonResult run_optimizer_comparison(const ExperimentSpec& base) {
  base.validate();
  std::vector<std::pair<std::string, ExperimentSpec>> members;
  {
    ExperimentSpec s = base;
    s.variant = Variant::full;
    s.optimizer = OptimizerKind::adam;
    s.hyperparams_source = HyperparamSource::fixed;
    s.training.learning_rate = 0.001;
    s.training.batch_size = 64;
    members.emplace_back("adam", s);
  }
  {
    ExperimentSpec s = base;
    s.variant = Variant::full;
    s.optimizer = OptimizerKind::adaptive_momentum;
    s.hyperparams_source = HyperparamSource::fixed;
    s.training.learning_rate = 0.001;
    s.training.batch_size = 64;
    s.training.momentum.initial = 0.9;
    s.training.momentum.update_rate = 0.1;
    members.emplace_back("adaptive-momentum", s);
  }
  {
    ExperimentSpec s = base;
    s.variant = Variant::full;
    s.optimizer = OptimizerKind::sgd;
    s.hyperparams_source = HyperparamSource::pso_search;
    s.training.learning_rate.reset();
    members.emplace_back("sgd+pso", s);
  }
  for (auto& [label, s] : members) {
    s.name = base.name + "/" + label;
    s.output_dir = base.output_dir / label;
  }
  ComparisonResult result;
  result.reports.resize(members.size());
  parallel_for(members.size(), suite_threads(),
               [&](std::size_t i) { result.reports[i] = run_experiment(members[i].second); });
  for (std::size_t i = 0; i < members.size(); ++i)
    result.table.push_back({members[i].first, result.reports[i].efficiency, result.reports[i].eval});
  write_text(base.output_dir / "optimizer_comparison.csv", comparison_table_csv(result.table));
  return result;
}

pso::Objective objective_by_name(const std::string& name, std::size_t dimension) {
  if (dimension == 0) throw ConfigError("objective dimension must be at least 1");
  if (name == "sphere") return pso::sphere_objective(dimension);
  if (name == "rastrigin") return pso::rastrigin_objective(dimension);
  throw ConfigError("unknown objective '" + name + "' (expected sphere or rastrigin)");
}

std::vector<PsoConfigSummary> run_pso_distribution_study(const PsoStudySpec& spec) {
  const auto objective = objective_by_name(spec.objective, spec.dimension);
  if (spec.runs == 0) throw ConfigError("pso study: runs must be at least 1");
  if (spec.configs.empty()) throw ConfigError("pso study: no configurations");
  const double bound = spec.bound.value_or(spec.objective == "rastrigin" ? 5.12 : 5.0);
  if (!(bound > 0.0)) throw ConfigError("pso study: bound must be positive");

  std::vector<PsoConfigSummary> out(spec.configs.size());
  for (std::size_t c = 0; c < spec.configs.size(); ++c) {
    out[c].config = schedule_name(spec.configs[c]);
    out[c].best_values.resize(spec.runs);
    out[c].histories.resize(spec.runs);
    for (std::size_t r = 0; r < spec.runs; ++r) out[c].run_seeds.push_back(spec.base_seed + r);
  }
  parallel_for(spec.configs.size() * spec.runs, suite_threads(), [&](std::size_t job) {
    const std::size_t c = job / spec.runs, r = job % spec.runs;
    pso::SwarmConfig cfg = spec.swarm;
    cfg.lower.assign(spec.dimension, -bound);
    cfg.upper.assign(spec.dimension, bound);
    cfg.schedule = spec.configs[c];
    cfg.seed = out[c].run_seeds[r];
    const auto res = pso::run(cfg, objective);
    out[c].best_values[r] = res.best_value;
    out[c].histories[r] = res.history;
  });
  for (auto& s : out) {
    s.mean = mean_of(s.best_values);
    s.std = population_std(s.best_values);
    std::vector<double> sorted = s.best_values;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    s.median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  }

  if (!spec.output_dir.empty()) {
    std::string runs = "config,run_seed,best_value\n";
    std::string histories = "config,run_seed,iteration,global_best_value\n";
    json configs = json::array();
    for (const auto& s : out) {
      for (std::size_t r = 0; r < s.best_values.size(); ++r) {
        runs += s.config + "," + std::to_string(s.run_seeds[r]) + "," + num(s.best_values[r]) + "\n";
        for (std::size_t k = 0; k < s.histories[r].size(); ++k)
          histories += s.config + "," + std::to_string(s.run_seeds[r]) + "," + std::to_string(k + 1) + "," +
                       num(s.histories[r][k]) + "\n";
      }
      configs.push_back({{"config", s.config},
                         {"runs", s.best_values.size()},
                         {"mean", s.mean},
                         {"median", s.median},
                         {"std", s.std},
                         {"min", *std::min_element(s.best_values.begin(), s.best_values.end())},
                         {"max", *std::max_element(s.best_values.begin(), s.best_values.end())}});
    }
    const json summary = {{"objective", spec.objective},
                          {"dimension", spec.dimension},
                          {"bound", bound},
                          {"particles", spec.swarm.particles},
                          {"iterations", spec.swarm.iterations},
                          {"base_seed", spec.base_seed},
                          {"configs", configs}};
    write_text(spec.output_dir / "pso_runs.csv", runs);
    write_text(spec.output_dir / "pso_histories.csv", histories);
    write_text(spec.output_dir / "pso_summary.json", summary.dump(2) + "\n");
  }
  return out;
}

GradCheckResult run_gradient_check(std::size_t seeds, double step) {
  ModelConfig c;
  c.input_features = 2;
  c.lookback = 6;
  c.lstm_hidden = 4;
  c.lstm_layers = 2;
  c.d_model = 8;
  c.heads = 2;
  c.encoder_layers = 1;
  c.d_ff = 32;
  c.head_width = 4;

  GradCheckResult result;
  result.seeds = seeds;
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    SeededRng rng(seed);
    ModelParams params = ModelParams::random(c, rng);
    WindowedDataset ds;
    ds.lookback = c.lookback;
    ds.feature_names = {"a", "b"};
    ds.features = Tensor({3, c.lookback, c.input_features});
    for (double& v : ds.features.data()) v = rng.normal();
    ds.targets = {rng.normal(), rng.normal(), rng.normal()};
    const std::vector<std::size_t> idx{0, 1, 2};

    const auto bg = batch_gradient(params, ds, idx);
    const auto analytic = parameter_tensors(bg.grads);
    const auto values = parameter_tensors(params);
    for (std::size_t k = 0; k < values.size(); ++k) {
      Tensor& t = *values[k].tensor;
      for (std::size_t e = 0; e < t.size(); ++e) {
        const double saved = t[e];
        t[e] = saved + step;
        const double up = dataset_mse(params, ds, idx);
        t[e] = saved - step;
        const double down = dataset_mse(params, ds, idx);
        t[e] = saved;
        const double numeric = (up - down) / (2.0 * step);
        const double a = (*analytic[k].tensor)[e];
        const double scale = std::max({std::abs(a), std::abs(numeric), 1e-6});
        result.max_relative_error = std::max(result.max_relative_error, std::abs(a - numeric) / scale);
        ++result.checked_entries;
      }
    }
  }
  return result;
}

}  // namespace ltpnet
