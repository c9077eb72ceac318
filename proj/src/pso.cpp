#include "ltpnet/pso.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <thread>

#include "ltpnet/errors.hpp"

namespace ltpnet {

void SearchRanges::validate() const {
  if (lstm_hidden.min == 0 || lstm_hidden.min > lstm_hidden.max) throw ConfigError("invalid lstm_hidden range");
  if (transformer_layers.min > transformer_layers.max) throw ConfigError("invalid transformer_layers range");
  for (const auto& r : {lstm_learning_rate, transformer_learning_rate})
    if (!(r.min > 0.0) || r.min > r.max) throw ConfigError("learning-rate ranges must be positive and ordered");
  if (attention_heads.empty() || d_model.empty()) throw ConfigError("heads and d_model candidate lists must be non-empty");
  if (!std::is_sorted(attention_heads.begin(), attention_heads.end()) ||
      !std::is_sorted(d_model.begin(), d_model.end()))
    throw ConfigError("candidate lists must be sorted ascending");
  for (auto d : d_model) {
    if (d == 0 || d % 2 != 0) throw ConfigError("d_model candidates must be positive and even");
    const bool any = std::any_of(attention_heads.begin(), attention_heads.end(),
                                 [d](std::size_t h) { return h > 0 && d % h == 0; });
    if (!any) throw ConfigError("no head count divides d_model " + std::to_string(d));
  }
}

namespace pso {

namespace {

constexpr double kCollapsedWidth = 1e-9;

void evaluate_all(SwarmState& state, const SwarmConfig& cfg, const Objective& objective) {
  auto& particles = state.particles;
  const auto eval = [&](std::size_t i) {
    const double v = objective.evaluate(particles[i].position);
    particles[i].value = std::isfinite(v) ? v : std::numeric_limits<double>::max();
  };
  const std::size_t workers = std::min(std::max<std::size_t>(cfg.threads, 1), particles.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < particles.size(); ++i) eval(i);
    return;
  }
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < particles.size(); i += workers) eval(i);
    });
  }
}

void refresh_global_best(SwarmState& state) {
  // Strict comparison in index order: ties keep the lowest index.
  std::size_t best = state.global_best_index;
  double best_value = state.global_best_value;
  for (std::size_t i = 0; i < state.particles.size(); ++i) {
    if (state.particles[i].best_value < best_value) {
      best_value = state.particles[i].best_value;
      best = i;
    }
  }
  state.global_best_index = best;
  state.global_best_value = best_value;
  state.global_best = state.particles[best].best_position;
}

std::size_t nearest_candidate(double value, const std::vector<std::size_t>& candidates) {
  std::size_t best = candidates.front();
  double best_dist = std::abs(value - static_cast<double>(best));
  for (auto c : candidates) {
    const double d = std::abs(value - static_cast<double>(c));
    if (d < best_dist) {
      best = c;
      best_dist = d;
    }
  }
  return best;
}

}  // namespace

void SwarmConfig::validate(std::size_t dim) const {
  if (particles == 0) throw ConfigError("swarm needs at least one particle");
  if (lower.size() != dim || upper.size() != dim) {
    throw ConfigError("swarm bounds have " + std::to_string(lower.size()) + "/" + std::to_string(upper.size()) +
                      " entries for a " + std::to_string(dim) + "-dimensional objective");
  }
  for (std::size_t d = 0; d < dim; ++d)
    if (!(lower[d] < upper[d])) throw ConfigError("swarm bounds must satisfy lower < upper in every dimension");
  const auto valid_inertia = [](double w) { return w > 0.0 && w <= 1.0; };
  if (!valid_inertia(inertia)) throw ConfigError("inertia must lie in (0, 1]");
  if (schedule == InertiaSchedule::linear && (!valid_inertia(inertia_start) || !valid_inertia(inertia_end)))
    throw ConfigError("inertia schedule endpoints must lie in (0, 1]");
  if (cognitive < 0.0 || social < 0.0) throw ConfigError("acceleration coefficients must be non-negative");
  if (!(velocity_clamp > 0.0)) throw ConfigError("velocity clamp fraction must be positive");
}

double SwarmConfig::inertia_at(std::size_t iteration) const {
  if (schedule == InertiaSchedule::constant) return inertia;
  if (iterations <= 1) return inertia_start;
  const double frac = static_cast<double>(std::min(iteration, iterations - 1)) / static_cast<double>(iterations - 1);
  return inertia_start + (inertia_end - inertia_start) * frac;
}

SwarmState init_swarm(const SwarmConfig& cfg, const Objective& objective, std::uint64_t seed) {
  const std::size_t dim = objective.dimension;
  cfg.validate(dim);
  SwarmState state;
  state.particles.resize(cfg.particles);
  const SeededRng root(seed);
  for (std::size_t i = 0; i < cfg.particles; ++i) {
    state.streams.push_back(root.split(i));
    auto& p = state.particles[i];
    p.position.resize(dim);
    for (std::size_t d = 0; d < dim; ++d)
      p.position[d] = cfg.lower[d] + state.streams[i].uniform() * (cfg.upper[d] - cfg.lower[d]);
    p.velocity.assign(dim, 0.0);
  }
  evaluate_all(state, cfg, objective);
  for (auto& p : state.particles) {
    p.best_position = p.position;
    p.best_value = p.value;
  }
  state.global_best_index = 0;
  state.global_best_value = state.particles[0].best_value;
  refresh_global_best(state);
  return state;
}

SwarmState init_swarm(const SwarmConfig& cfg, const Objective& objective) {
  return init_swarm(cfg, objective, cfg.seed);
}

double updated_velocity(double velocity, double to_personal, double to_global, double inertia, double cognitive,
                        double social, double r1, double r2) {
  return inertia * velocity + cognitive * r1 * to_personal + social * r2 * to_global;
}

void step(SwarmState& state, const SwarmConfig& cfg, const Objective& objective) {
  const double inertia = cfg.inertia_at(state.iteration);
  const std::size_t dim = objective.dimension;
  for (std::size_t i = 0; i < state.particles.size(); ++i) {
    auto& p = state.particles[i];
    auto& rng = state.streams[i];
    double r1 = rng.uniform();
    double r2 = rng.uniform();
    for (std::size_t d = 0; d < dim; ++d) {
      if (cfg.random_mode == RandomMode::per_dimension && d > 0) {
        r1 = rng.uniform();
        r2 = rng.uniform();
      }
      const double span = cfg.upper[d] - cfg.lower[d];
      const double v_max = cfg.velocity_clamp * span;
      double v = updated_velocity(p.velocity[d], p.best_position[d] - p.position[d],
                                  state.global_best[d] - p.position[d], inertia, cfg.cognitive, cfg.social, r1, r2);
      v = std::clamp(v, -v_max, v_max);
      double x = p.position[d] + v;
      if (x < cfg.lower[d] || x > cfg.upper[d]) {
        x = std::clamp(x, cfg.lower[d], cfg.upper[d]);
        v = 0.0;
      }
      p.position[d] = x;
      p.velocity[d] = v;
    }
  }
  evaluate_all(state, cfg, objective);
  for (auto& p : state.particles) {
    if (p.value < p.best_value) {
      p.best_value = p.value;
      p.best_position = p.position;
    }
  }
  refresh_global_best(state);
  ++state.iteration;
  state.history.push_back(state.global_best_value);
}

RunResult run(const SwarmConfig& cfg, const Objective& objective) {
  auto state = init_swarm(cfg, objective);
  for (std::size_t t = 0; t < cfg.iterations; ++t) step(state, cfg, objective);
  return {state.global_best, state.global_best_value, state.history};
}

double sphere(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

double rastrigin(std::span<const double> x) {
  double s = 10.0 * static_cast<double>(x.size());
  for (double v : x) s += v * v - 10.0 * std::cos(2.0 * std::numbers::pi * v);
  return s;
}

Objective sphere_objective(std::size_t dimension) {
  return {dimension, [](std::span<const double> x) { return sphere(x); }, "sphere"};
}

Objective rastrigin_objective(std::size_t dimension) {
  return {dimension, [](std::span<const double> x) { return rastrigin(x); }, "rastrigin"};
}

std::vector<double> encode_hyperparams(const HyperparamPoint& h, const SearchRanges& r) {
  r.validate();
  const auto in_int = [](std::size_t v, IntRange range, const char* what) {
    if (v < range.min || v > range.max) throw ConfigError(std::string(what) + " outside its search range");
    return static_cast<double>(v);
  };
  const auto in_log = [](double v, RealRange range, const char* what) {
    if (!(v >= range.min * (1 - 1e-12) && v <= range.max * (1 + 1e-12)))
      throw ConfigError(std::string(what) + " outside its search range");
    return std::log10(v);
  };
  const auto in_set = [](std::size_t v, const std::vector<std::size_t>& set, const char* what) {
    if (std::find(set.begin(), set.end(), v) == set.end())
      throw ConfigError(std::string(what) + " is not an admissible value");
    return static_cast<double>(v);
  };
  if (h.d_model % h.attention_heads != 0) throw ConfigError("attention heads must divide d_model");
  return {in_int(h.lstm_hidden, r.lstm_hidden, "lstm_hidden"),
          in_log(h.lstm_learning_rate, r.lstm_learning_rate, "lstm_learning_rate"),
          in_int(h.transformer_layers, r.transformer_layers, "transformer_layers"),
          in_set(h.attention_heads, r.attention_heads, "attention_heads"),
          in_set(h.d_model, r.d_model, "d_model"),
          in_log(h.transformer_learning_rate, r.transformer_learning_rate, "transformer_learning_rate")};
}

HyperparamPoint decode_position(std::span<const double> x, const SearchRanges& r) {
  if (x.size() != kHyperparamAxes) throw ConfigError("hyperparameter position must have 6 coordinates");
  const auto round_int = [](double v, IntRange range) {
    const double clamped = std::clamp(std::round(v), static_cast<double>(range.min), static_cast<double>(range.max));
    return static_cast<std::size_t>(clamped);
  };
  const auto from_log = [](double v, RealRange range) { return std::clamp(std::pow(10.0, v), range.min, range.max); };

  HyperparamPoint h;
  h.lstm_hidden = round_int(x[0], r.lstm_hidden);
  h.lstm_learning_rate = from_log(x[1], r.lstm_learning_rate);
  h.transformer_layers = round_int(x[2], r.transformer_layers);
  h.d_model = nearest_candidate(x[4], r.d_model);
  std::vector<std::size_t> heads;
  for (auto c : r.attention_heads)
    if (c > 0 && h.d_model % c == 0) heads.push_back(c);
  h.attention_heads = nearest_candidate(x[3], heads);
  h.transformer_learning_rate = from_log(x[5], r.transformer_learning_rate);
  return h;
}

void hyperparam_bounds(const SearchRanges& r, std::vector<double>& lower, std::vector<double>& upper) {
  r.validate();
  lower = {static_cast<double>(r.lstm_hidden.min), std::log10(r.lstm_learning_rate.min),
           static_cast<double>(r.transformer_layers.min), static_cast<double>(r.attention_heads.front()),
           static_cast<double>(r.d_model.front()), std::log10(r.transformer_learning_rate.min)};
  upper = {static_cast<double>(r.lstm_hidden.max), std::log10(r.lstm_learning_rate.max),
           static_cast<double>(r.transformer_layers.max), static_cast<double>(r.attention_heads.back()),
           static_cast<double>(r.d_model.back()), std::log10(r.transformer_learning_rate.max)};
  for (std::size_t d = 0; d < lower.size(); ++d)
    if (!(upper[d] > lower[d])) upper[d] = lower[d] + kCollapsedWidth;
}

}  // namespace pso
}  // namespace ltpnet
