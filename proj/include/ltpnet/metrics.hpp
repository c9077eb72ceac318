#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>

#include "ltpnet/model.hpp"

namespace ltpnet {

struct EvalReport {
  double mae = 0.0;
  /// Percent. Absent when every actual is (near) zero.
  std::optional<double> mape;
  double rmse = 0.0;
  double mse = 0.0;
  std::size_t n = 0;
  std::size_t skipped_mape_points = 0;
};

/// Actuals with |a| < this are left out of MAPE and counted instead.
inline constexpr double kMapeZeroGuard = 1e-8;

EvalReport evaluate(std::span<const double> pred, std::span<const double> actual);

struct EfficiencyReport {
  std::uint64_t parameters = 0;
  std::uint64_t flops = 0;
  double inference_ms = 0.0;
  double inference_ms_std = 0.0;
  double training_seconds = 0.0;
};

std::uint64_t count_parameters(const ModelParams& params);
std::uint64_t count_parameters(std::span<const Tensor* const> tensors);

// FLOPs convention: a multiply-add counts 2, every other element-wise
// operation (bias add, activation, gate product, residual add) counts 1,
// softmax counts 5 per element and layer norm 7 per element.
inline constexpr std::uint64_t kSoftmaxFlopsPerElement = 5;
inline constexpr std::uint64_t kLayerNormFlopsPerElement = 7;

std::uint64_t matmul_flops(std::uint64_t m, std::uint64_t k, std::uint64_t n);
std::uint64_t lstm_flops(const ModelConfig& config, std::uint64_t seq_len);
std::uint64_t encoder_flops(const ModelConfig& config, std::uint64_t seq_len);
std::uint64_t head_flops(const ModelConfig& config, std::uint64_t seq_len);
/// Forward-pass FLOPs for one window of `seq_len` steps.
std::uint64_t estimate_flops(const ModelParams& params, std::uint64_t seq_len);

struct TimingResult {
  double mean_ms = 0.0;
  double std_ms = 0.0;
};
/// Runs `thunk` warmup + repetitions times on a monotonic clock; warmup runs
/// are discarded. Population std over the timed repetitions.
TimingResult time_run(const std::function<void()>& thunk, std::size_t repetitions, std::size_t warmup = 0);

}  // namespace ltpnet
