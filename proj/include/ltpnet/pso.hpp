#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ltpnet/hyperparams.hpp"
#include "ltpnet/rng.hpp"

namespace ltpnet::pso {

enum class InertiaSchedule { constant, linear };

/// How the uniform factors of the cognitive and social terms are drawn.
/// `scalar` uses one draw per term per particle per iteration; `per_dimension`
/// draws one per coordinate.
enum class RandomMode { scalar, per_dimension };

struct SwarmConfig {
  std::size_t particles = 50;
  std::size_t iterations = 100;
  double inertia = 0.5;
  double cognitive = 1.0;
  double social = 1.0;
  std::vector<double> lower;
  std::vector<double> upper;
  /// |v_d| <= velocity_clamp * (upper_d - lower_d).
  double velocity_clamp = 0.5;
  InertiaSchedule schedule = InertiaSchedule::constant;
  double inertia_start = 0.9;
  double inertia_end = 0.4;
  RandomMode random_mode = RandomMode::scalar;
  std::uint64_t seed = 0;
  /// Worker threads for objective evaluation. Results do not depend on it.
  std::size_t threads = 1;

  std::size_t dimension() const { return lower.size(); }
  void validate(std::size_t dimension) const;
  /// Inertia used by step number `iteration` (0-based).
  double inertia_at(std::size_t iteration) const;
};

struct Particle {
  std::vector<double> position;
  std::vector<double> velocity;
  std::vector<double> best_position;
  double best_value = 0.0;
  double value = 0.0;
};

struct Objective {
  std::size_t dimension = 0;
  std::function<double(std::span<const double>)> evaluate;
  std::string description;
};

struct SwarmState {
  std::vector<Particle> particles;
  std::vector<SeededRng> streams;  // one per particle
  std::vector<double> global_best;
  double global_best_value = 0.0;
  std::size_t global_best_index = 0;
  std::size_t iteration = 0;
  std::vector<double> history;  // global best value after each step
};

/// Uniform positions in the bounds, zero velocities, personal bests at the
/// start positions. Particle i draws from stream `i` of `seed`.
SwarmState init_swarm(const SwarmConfig& cfg, const Objective& objective, std::uint64_t seed);
SwarmState init_swarm(const SwarmConfig& cfg, const Objective& objective);

/// w*v + c1*r1*(p - x) + c2*r2*(g - x) for one coordinate.
double updated_velocity(double velocity, double to_personal, double to_global, double inertia,
                        double cognitive, double social, double r1, double r2);

/// One synchronous iteration: move every particle, clamp, re-evaluate,
/// refresh personal and global bests.
void step(SwarmState& state, const SwarmConfig& cfg, const Objective& objective);

struct RunResult {
  std::vector<double> best_position;
  double best_value = 0.0;
  std::vector<double> history;
};
RunResult run(const SwarmConfig& cfg, const Objective& objective);

double sphere(std::span<const double> x);
double rastrigin(std::span<const double> x);
Objective sphere_objective(std::size_t dimension);
Objective rastrigin_objective(std::size_t dimension);

// Hyperparameter axes: lstm_hidden, log10(lstm lr), transformer_layers,
// attention_heads, d_model, log10(transformer lr).
inline constexpr std::size_t kHyperparamAxes = 6;

std::vector<double> encode_hyperparams(const HyperparamPoint& point, const SearchRanges& ranges);
/// Rounds integer axes to the nearest admissible value; heads snap to the
/// nearest candidate dividing the decoded d_model.
HyperparamPoint decode_position(std::span<const double> position, const SearchRanges& ranges);
/// Search-space bounds. Collapsed ranges get a tiny positive width.
void hyperparam_bounds(const SearchRanges& ranges, std::vector<double>& lower, std::vector<double>& upper);

}  // namespace ltpnet::pso
