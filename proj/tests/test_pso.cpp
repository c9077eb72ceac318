#include <gtest/gtest.h>

#include <cmath>

#include "ltpnet/errors.hpp"
#include "ltpnet/pso.hpp"

using namespace ltpnet;
using namespace ltpnet::pso;

namespace {

SwarmConfig box(std::size_t dim, double lo, double hi, std::uint64_t seed = 0) {
  SwarmConfig cfg;
  cfg.lower.assign(dim, lo);
  cfg.upper.assign(dim, hi);
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST(Objectives, SphereValues) {
  EXPECT_EQ(sphere(std::vector<double>{0, 0, 0}), 0.0);
  EXPECT_EQ(sphere(std::vector<double>{1, 0, 0}), 1.0);
  EXPECT_EQ(sphere(std::vector<double>{1, 2, 3}), 14.0);
}

TEST(Objectives, RastriginValues) {
  EXPECT_NEAR(rastrigin(std::vector<double>{0, 0}), 0.0, 1e-12);
  EXPECT_NEAR(rastrigin(std::vector<double>{1}), 1.0, 1e-12);
  EXPECT_NEAR(rastrigin(std::vector<double>{0.5}), 20.25, 1e-12);
}

TEST(Velocity, HandSubstitution) {
  EXPECT_DOUBLE_EQ(updated_velocity(0.2, 1.0, 2.0, 0.5, 1.0, 1.0, 0.5, 0.5), 1.6);
}

TEST(Init, DegenerateIntervalPinsPositions) {
  auto cfg = box(3, 0.0, 1e-12);
  const auto s = init_swarm(cfg, sphere_objective(3));
  for (const auto& p : s.particles)
    for (double x : p.position) EXPECT_NEAR(x, 0.0, 1e-12);
}

TEST(Init, DeterministicPerSeed) {
  const auto cfg = box(4, -5, 5, 42);
  const auto a = init_swarm(cfg, sphere_objective(4)), b = init_swarm(cfg, sphere_objective(4));
  for (std::size_t i = 0; i < a.particles.size(); ++i) EXPECT_EQ(a.particles[i].position, b.particles[i].position);
}

TEST(Init, PositionMeanNearCentreAndVelocityZero) {
  const auto s = init_swarm(box(2, -5, 5, 3), sphere_objective(2));
  ASSERT_EQ(s.particles.size(), 50u);
  for (std::size_t d = 0; d < 2; ++d) {
    double mean = 0.0;
    for (const auto& p : s.particles) mean += p.position[d] / 50.0;
    EXPECT_LT(std::abs(mean), 0.6);
  }
  for (const auto& p : s.particles) {
    EXPECT_EQ(p.velocity, (std::vector<double>{0.0, 0.0}));
    EXPECT_EQ(p.best_position, p.position);
  }
}

TEST(Init, GlobalBestIsArgminWithLowestIndexTies) {
  Objective flat{2, [](std::span<const double>) { return 3.0; }, "flat"};
  const auto s = init_swarm(box(2, -1, 1), flat);
  EXPECT_EQ(s.global_best_index, 0u);
  EXPECT_EQ(s.global_best_value, 3.0);

  const auto t = init_swarm(box(2, -5, 5, 9), sphere_objective(2));
  double best = t.particles[0].value;
  for (const auto& p : t.particles) best = std::min(best, p.value);
  EXPECT_EQ(t.global_best_value, best);
}

TEST(Init, InvalidBoundsRejected) {
  auto cfg = box(2, 1.0, 1.0);
  EXPECT_THROW(init_swarm(cfg, sphere_objective(2)), ConfigError);
  EXPECT_THROW(init_swarm(box(3, -1, 1), sphere_objective(2)), ConfigError);
}

TEST(Step, ParticleAtOptimumStaysPut) {
  auto cfg = box(2, -5, 5);
  cfg.particles = 1;
  auto s = init_swarm(cfg, sphere_objective(2));
  auto& p = s.particles[0];
  p.position = p.best_position = s.global_best = {1.5, -2.0};
  p.velocity = {0.0, 0.0};
  step(s, cfg, sphere_objective(2));
  EXPECT_EQ(s.particles[0].position, (std::vector<double>{1.5, -2.0}));
}

TEST(Step, InvariantsOverInstrumentedRuns) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto cfg = box(3, -5.12, 5.12, seed);
    cfg.particles = 20;
    const auto obj = rastrigin_objective(3);
    auto s = init_swarm(cfg, obj);
    std::vector<double> lowest(s.particles.size());
    for (std::size_t i = 0; i < lowest.size(); ++i) lowest[i] = s.particles[i].value;
    double prev_best = s.global_best_value;
    for (int t = 0; t < 60; ++t) {
      step(s, cfg, obj);
      EXPECT_LE(s.global_best_value, prev_best);
      prev_best = s.global_best_value;
      double min_personal = s.particles[0].best_value;
      for (std::size_t i = 0; i < s.particles.size(); ++i) {
        const auto& p = s.particles[i];
        for (std::size_t d = 0; d < 3; ++d) {
          EXPECT_GE(p.position[d], cfg.lower[d]);
          EXPECT_LE(p.position[d], cfg.upper[d]);
          EXPECT_LE(std::abs(p.velocity[d]), 0.5 * 10.24 + 1e-12);
        }
        lowest[i] = std::min(lowest[i], p.value);
        EXPECT_EQ(p.best_value, lowest[i]);
        EXPECT_EQ(p.best_value, obj.evaluate(p.best_position));
        min_personal = std::min(min_personal, p.best_value);
      }
      EXPECT_EQ(s.global_best_value, min_personal);
    }
    EXPECT_EQ(s.history.size(), 60u);
  }
}

TEST(Step, VelocityDecaysGeometricallyWithoutAttraction) {
  auto cfg = box(2, -1e6, 1e6);
  cfg.cognitive = cfg.social = 0.0;
  cfg.inertia = 0.7;
  cfg.particles = 5;
  auto s = init_swarm(cfg, sphere_objective(2));
  for (auto& p : s.particles) p.velocity = {3.0, -4.0};
  for (int t = 0; t < 20; ++t) {
    std::vector<double> before;
    for (const auto& p : s.particles) before.push_back(std::hypot(p.velocity[0], p.velocity[1]));
    step(s, cfg, sphere_objective(2));
    for (std::size_t i = 0; i < s.particles.size(); ++i) {
      const auto& v = s.particles[i].velocity;
      EXPECT_NEAR(std::hypot(v[0], v[1]), 0.7 * before[i], 1e-12);
    }
  }
}

TEST(Step, BoundHitZeroesVelocityComponent) {
  auto cfg = box(1, 0.0, 1.0);
  cfg.particles = 1;
  cfg.cognitive = cfg.social = 0.0;
  cfg.inertia = 1.0;
  auto s = init_swarm(cfg, sphere_objective(1));
  s.particles[0].position = {0.9};
  s.particles[0].velocity = {0.4};
  step(s, cfg, sphere_objective(1));
  EXPECT_EQ(s.particles[0].position[0], 1.0);
  EXPECT_EQ(s.particles[0].velocity[0], 0.0);
}

TEST(InertiaSchedule, LinearEndpoints) {
  auto cfg = box(1, 0, 1);
  cfg.schedule = InertiaSchedule::linear;
  cfg.iterations = 11;
  EXPECT_DOUBLE_EQ(cfg.inertia_at(0), 0.9);
  EXPECT_DOUBLE_EQ(cfg.inertia_at(5), 0.65);
  EXPECT_DOUBLE_EQ(cfg.inertia_at(10), 0.4);
  cfg.schedule = InertiaSchedule::constant;
  EXPECT_EQ(cfg.inertia_at(7), 0.5);
}

TEST(Run, ZeroIterationsReturnsInitialBest) {
  auto cfg = box(2, -5, 5, 4);
  cfg.iterations = 0;
  const auto r = run(cfg, sphere_objective(2));
  EXPECT_EQ(r.best_value, init_swarm(cfg, sphere_objective(2)).global_best_value);
  EXPECT_TRUE(r.history.empty());
}

TEST(Run, ConstantObjective) {
  Objective flat{3, [](std::span<const double>) { return -2.5; }, "flat"};
  auto cfg = box(3, -1, 1);
  cfg.iterations = 5;
  EXPECT_EQ(run(cfg, flat).best_value, -2.5);
}

TEST(Run, DeterministicAndThreadIndependent) {
  auto cfg = box(5, -5, 5, 77);
  cfg.iterations = 30;
  const auto a = run(cfg, rastrigin_objective(5));
  const auto b = run(cfg, rastrigin_objective(5));
  cfg.threads = 4;
  const auto c = run(cfg, rastrigin_objective(5));
  EXPECT_EQ(a.history, b.history);
  EXPECT_EQ(a.history, c.history);
  EXPECT_EQ(a.best_position, c.best_position);
}

TEST(Run, PerDimensionModeDiffersButStaysValid) {
  auto cfg = box(3, -5, 5, 5);
  cfg.iterations = 20;
  const auto scalar = run(cfg, sphere_objective(3));
  cfg.random_mode = RandomMode::per_dimension;
  const auto per_dim = run(cfg, sphere_objective(3));
  EXPECT_NE(scalar.history, per_dim.history);
  EXPECT_LT(per_dim.best_value, 1.0);
}

TEST(Run, SphereConvergesUnderPaperConfig) {
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = run(box(5, -5, 5, seed), sphere_objective(5));
    hits += r.best_value <= 1e-3;
    for (std::size_t t = 1; t < r.history.size(); ++t) EXPECT_LE(r.history[t], r.history[t - 1]);
  }
  EXPECT_GE(hits, 9);
}

TEST(Encoding, RoundTripOnLattice) {
  const SearchRanges r;
  for (std::size_t hidden : {16, 128, 256})
    for (double lr : {1e-4, 1e-3, 1e-2})
      for (std::size_t layers : {1, 6, 8})
        for (std::size_t d : r.d_model)
          for (std::size_t heads : r.attention_heads) {
            if (d % heads) continue;
            const HyperparamPoint h{hidden, lr, layers, heads, d, lr / 10.0};
            EXPECT_EQ(decode_position(encode_hyperparams(h, r), r), h);
          }
}

TEST(Encoding, LogMidpointAndHeadSnap) {
  const SearchRanges r;
  auto x = encode_hyperparams(kDefaultHyperparams, r);
  x[1] = -3.5;
  EXPECT_NEAR(decode_position(x, r).lstm_learning_rate, 0.000316227766, 1e-12);
  x[3] = 7.0;
  const auto h = decode_position(x, r);
  EXPECT_EQ(h.d_model, 256u);
  EXPECT_EQ(h.attention_heads, 8u);
}

TEST(Encoding, HeadsOnlyDecodeToDivisors) {
  SearchRanges r;
  r.attention_heads = {3, 4, 8};
  r.d_model = {64, 96};
  SeededRng rng(1);
  std::vector<double> lo, hi;
  hyperparam_bounds(r, lo, hi);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> x(kHyperparamAxes);
    for (std::size_t d = 0; d < x.size(); ++d) x[d] = rng.uniform(lo[d], hi[d]);
    const auto h = decode_position(x, r);
    EXPECT_EQ(h.d_model % h.attention_heads, 0u);
  }
}

TEST(Encoding, OutOfRangeRejected) {
  const SearchRanges r;
  HyperparamPoint h;
  h.lstm_hidden = 4;
  EXPECT_THROW(encode_hyperparams(h, r), ConfigError);
  h = HyperparamPoint{};
  h.transformer_learning_rate = 0.5;
  EXPECT_THROW(encode_hyperparams(h, r), ConfigError);
  h = HyperparamPoint{};
  h.attention_heads = 5;
  EXPECT_THROW(encode_hyperparams(h, r), ConfigError);
}

TEST(Encoding, CollapsedRangesStayDecodable) {
  SearchRanges r;
  r.lstm_hidden = {32, 32};
  r.lstm_learning_rate = {1e-3, 1e-3};
  std::vector<double> lo, hi;
  hyperparam_bounds(r, lo, hi);
  EXPECT_LT(lo[0], hi[0]);
  EXPECT_LT(lo[1], hi[1]);
  std::vector<double> x = hi;
  const auto h = decode_position(x, r);
  EXPECT_EQ(h.lstm_hidden, 32u);
  EXPECT_EQ(h.lstm_learning_rate, 1e-3);
}
