#include "ltpnet/metrics.hpp"

#include <chrono>
#include <cmath>
#include <vector>

#include "ltpnet/errors.hpp"

namespace ltpnet {

EvalReport evaluate(std::span<const double> pred, std::span<const double> actual) {
  if (pred.empty()) throw DataError("evaluate: empty input");
  if (pred.size() != actual.size()) throw ShapeError("evaluate: prediction and actual lengths differ");
  EvalReport r;
  r.n = pred.size();
  double abs_sum = 0.0, sq_sum = 0.0, pct_sum = 0.0;
  std::size_t pct_n = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - actual[i];
    abs_sum += std::abs(e);
    sq_sum += e * e;
    if (std::abs(actual[i]) >= kMapeZeroGuard) {
      pct_sum += std::abs(e) / std::abs(actual[i]);
      ++pct_n;
    } else {
      ++r.skipped_mape_points;
    }
  }
  const double n = static_cast<double>(r.n);
  r.mae = abs_sum / n;
  r.mse = sq_sum / n;
  r.rmse = std::sqrt(r.mse);
  if (pct_n > 0) r.mape = 100.0 * pct_sum / static_cast<double>(pct_n);
  return r;
}

std::uint64_t count_parameters(std::span<const Tensor* const> tensors) {
  std::uint64_t n = 0;
  for (const Tensor* t : tensors) n += t->size();
  return n;
}

std::uint64_t count_parameters(const ModelParams& params) {
  std::uint64_t n = 0;
  for (const auto& ref : parameter_tensors(params)) n += ref.tensor->size();
  return n;
}

std::uint64_t matmul_flops(std::uint64_t m, std::uint64_t k, std::uint64_t n) { return 2 * m * k * n; }

std::uint64_t lstm_flops(const ModelConfig& c, std::uint64_t seq_len) {
  if (!c.lstm_enabled) return 0;
  const std::uint64_t h = c.lstm_hidden;
  std::uint64_t per_step_total = 0;
  for (std::size_t l = 0; l < c.lstm_layers; ++l) {
    const std::uint64_t f = l == 0 ? c.input_features : h;
    std::uint64_t step = 0;
    // Gates i, f, o: input, recurrent and peephole products, three adds, bias, sigmoid.
    step += 3 * (matmul_flops(h, f, 1) + 2 * matmul_flops(h, h, 1) + 3 * h + h);
    // Candidate: two products, two adds (one of them the bias), tanh.
    step += matmul_flops(h, f, 1) + matmul_flops(h, h, 1) + 2 * h + h;
    // c = f*c_prev + i*g (3), h = o * tanh(c) (2).
    step += 5 * h;
    per_step_total += step;
  }
  return per_step_total * seq_len;
}

std::uint64_t encoder_flops(const ModelConfig& c, std::uint64_t seq_len) {
  const std::uint64_t d = c.d_model;
  const std::uint64_t in = c.lstm_enabled ? c.lstm_hidden : c.input_features;
  const std::uint64_t s = c.transformer_enabled ? seq_len : 1;
  std::uint64_t total = matmul_flops(s, in, d) + s * d;  // projection + bias
  if (!c.transformer_enabled) return total;
  total += s * d;  // positional add
  const std::uint64_t heads = c.heads;
  const std::uint64_t dh = d / heads;
  const std::uint64_t ff = c.d_ff;
  for (std::size_t l = 0; l < c.encoder_layers; ++l) {
    std::uint64_t layer = 0;
    layer += 3 * matmul_flops(s, d, d);                    // Q, K, V
    layer += heads * matmul_flops(s, dh, s);               // scores
    layer += heads * s * s;                                // scaling
    layer += heads * s * s * kSoftmaxFlopsPerElement;      // softmax
    layer += heads * matmul_flops(s, s, dh);               // weights . V
    layer += matmul_flops(s, d, d);                        // output projection
    layer += s * d + s * d * kLayerNormFlopsPerElement;    // residual + norm
    layer += matmul_flops(s, d, ff) + s * ff + s * ff;     // W1, b1, ReLU
    layer += matmul_flops(s, ff, d) + s * d;               // W2, b2
    layer += s * d + s * d * kLayerNormFlopsPerElement;    // residual + norm
    total += layer;
  }
  return total;
}

std::uint64_t head_flops(const ModelConfig& c, std::uint64_t seq_len) {
  const std::uint64_t s = c.transformer_enabled ? seq_len : 1;
  const std::uint64_t d = c.d_model;
  const std::uint64_t w = c.head_width;
  return s * d + matmul_flops(1, d, w) + w + w + matmul_flops(1, w, 1) + 1;
}

std::uint64_t estimate_flops(const ModelParams& params, std::uint64_t seq_len) {
  if (params.head.w_a.empty() && params.lstm.empty() && params.encoder.w_in.empty()) return 0;
  const auto& c = params.config;
  return lstm_flops(c, seq_len) + encoder_flops(c, seq_len) + head_flops(c, seq_len);
}

TimingResult time_run(const std::function<void()>& thunk, std::size_t repetitions, std::size_t warmup) {
  if (repetitions == 0) throw ConfigError("time_run: repetitions must be at least 1");
  for (std::size_t i = 0; i < warmup; ++i) thunk();
  std::vector<double> ms;
  ms.reserve(repetitions);
  for (std::size_t i = 0; i < repetitions; ++i) {
    const auto start = std::chrono::steady_clock::now();
    thunk();
    const auto stop = std::chrono::steady_clock::now();
    ms.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
  }
  TimingResult r;
  for (double v : ms) r.mean_ms += v;
  r.mean_ms /= static_cast<double>(ms.size());
  for (double v : ms) r.std_ms += (v - r.mean_ms) * (v - r.mean_ms);
  r.std_ms = std::sqrt(r.std_ms / static_cast<double>(ms.size()));
  return r;
}

}  // namespace ltpnet
