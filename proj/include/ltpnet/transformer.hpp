#pragma once

#include <array>
#include <cstddef>
#include <string_view>
#include <vector>

#include "ltpnet/rng.hpp"
#include "ltpnet/tensor.hpp"

namespace ltpnet {

/// One post-norm encoder layer:
///   y1 = LN1(x + MHA(x)),  y2 = LN2(y1 + FF(y1)).
/// Query/key/value projections of all heads live side by side in one
/// d_model x d_model matrix; head h owns columns [h*d_head, (h+1)*d_head).
struct EncoderLayerParams {
  std::size_t d_model = 0;
  std::size_t heads = 0;
  std::size_t d_ff = 0;

  Tensor w_q, w_k, w_v, w_o;
  Tensor w_1, b_1, w_2, b_2;
  Tensor ln1_gain, ln1_bias, ln2_gain, ln2_bias;

  static constexpr std::size_t kTensorCount = 12;
  static constexpr std::array<std::string_view, kTensorCount> kTensorNames = {
      "w_q", "w_k", "w_v", "w_o", "w_1", "b_1", "w_2", "b_2",
      "ln1_gain", "ln1_bias", "ln2_gain", "ln2_bias"};
  std::array<Tensor*, kTensorCount> tensors();
  std::array<const Tensor*, kTensorCount> tensors() const;

  std::size_t d_head() const { return d_model / heads; }

  /// Zero weights and biases; layer-norm gains are 1.
  static EncoderLayerParams zeros(std::size_t d_model, std::size_t heads, std::size_t d_ff);
  /// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  static EncoderLayerParams random(std::size_t d_model, std::size_t heads, std::size_t d_ff, SeededRng& rng);
  void validate() const;
};

/// Sinusoidal table, PE[pos, 2i] = sin(pos / 10000^(2i/d)), PE[pos, 2i+1] = cos(...).
Tensor positional_encoding(std::size_t seq_len, std::size_t d_model);

struct EncoderStack {
  std::size_t input_size = 0;
  std::size_t d_model = 0;
  std::size_t max_len = 0;
  Tensor w_in, b_in;  // input_size x d_model, d_model
  std::vector<EncoderLayerParams> layers;
  Tensor positional;  // max_len x d_model; constant, never trained
  bool use_positional = true;

  static EncoderStack zeros(std::size_t input_size, std::size_t d_model, std::size_t layers,
                            std::size_t heads, std::size_t d_ff, std::size_t max_len);
  static EncoderStack random(std::size_t input_size, std::size_t d_model, std::size_t layers,
                             std::size_t heads, std::size_t d_ff, std::size_t max_len, SeededRng& rng);
  std::size_t parameter_count() const;
};

/// Mean-pool over positions, then ReLU(p W_a + b_a) W_b + b_b.
struct PredictionHead {
  std::size_t d_model = 0;
  std::size_t width = 0;
  Tensor w_a, b_a, w_b, b_b;

  static constexpr std::size_t kTensorCount = 4;
  static constexpr std::array<std::string_view, kTensorCount> kTensorNames = {"w_a", "b_a", "w_b", "b_b"};
  std::array<Tensor*, kTensorCount> tensors();
  std::array<const Tensor*, kTensorCount> tensors() const;

  static PredictionHead zeros(std::size_t d_model, std::size_t width);
  static PredictionHead random(std::size_t d_model, std::size_t width, SeededRng& rng);
  std::size_t parameter_count() const;
};

struct AttentionResult {
  Tensor output;   // seq x d_head
  Tensor weights;  // seq x seq, rows sum to 1
};
/// softmax(Q K^T / sqrt(d_head)) V.
AttentionResult scaled_attention(const Tensor& q, const Tensor& k, const Tensor& v);

struct AttentionCache {
  Tensor x;
  std::vector<Tensor> q, k, v, weights;  // per head
  Tensor concat;                          // seq x d_model, heads side by side
};
Tensor multi_head_attention(const Tensor& x, const EncoderLayerParams& p, AttentionCache* cache = nullptr);

struct FeedForwardCache {
  Tensor x;
  Tensor hidden;  // post-ReLU, seq x d_ff
};
Tensor feed_forward(const Tensor& x, const Tensor& w_1, const Tensor& b_1, const Tensor& w_2,
                    const Tensor& b_2, FeedForwardCache* cache = nullptr);

struct LayerNormCache {
  Tensor normalized;  // (x - mean) * inv_std
  std::vector<double> inv_std;
};
Tensor layer_norm_cached(const Tensor& x, const Tensor& gain, const Tensor& bias, LayerNormCache& cache);
/// Returns dL/dx and adds into grad_gain / grad_bias.
Tensor layer_norm_backward(const LayerNormCache& cache, const Tensor& gain, const Tensor& grad_out,
                           Tensor& grad_gain, Tensor& grad_bias);

struct EncoderLayerCache {
  AttentionCache attention;
  LayerNormCache norm1;
  FeedForwardCache ff;
  LayerNormCache norm2;
};

struct EncoderLayerOutput {
  Tensor output;
  EncoderLayerCache cache;
};
EncoderLayerOutput encoder_layer_forward(const Tensor& x, const EncoderLayerParams& p);
/// Adds parameter gradients into `grads`; returns dL/dx.
Tensor encoder_layer_backward(const EncoderLayerCache& cache, const EncoderLayerParams& p,
                              const Tensor& grad_out, EncoderLayerParams& grads);

struct EncoderStackCache {
  Tensor input;
  std::vector<EncoderLayerCache> layers;
};
struct EncoderStackOutput {
  Tensor output;  // seq x d_model
  EncoderStackCache cache;
};
/// Input projection, positional encoding, then every layer in order.
EncoderStackOutput encoder_stack_forward(const Tensor& hidden, const EncoderStack& stack);
/// Adds gradients into `grads` (the positional table is never touched);
/// returns dL/d(hidden).
Tensor encoder_stack_backward(const EncoderStackCache& cache, const EncoderStack& stack,
                              const Tensor& grad_out, EncoderStack& grads);

struct HeadCache {
  std::size_t seq_len = 0;
  std::vector<double> pooled;
  std::vector<double> hidden;  // post-ReLU
};
double predict(const Tensor& encoded, const PredictionHead& head, HeadCache* cache = nullptr);
/// Adds gradients into `grads`; returns dL/d(encoded).
Tensor predict_backward(const HeadCache& cache, const PredictionHead& head, double grad_out,
                        PredictionHead& grads);

struct TransformerCache {
  EncoderStackCache encoder;
  HeadCache head;
};
struct TransformerGradients {
  EncoderStack encoder;
  PredictionHead head;
  Tensor input;  // dL/d(LSTM hidden sequence)
};
/// Reverse pass through head, encoder layers, positional add and input projection.
TransformerGradients transformer_backward(const TransformerCache& cache, const EncoderStack& stack,
                                          const PredictionHead& head, double grad_out);

EncoderStack zeros_like(const EncoderStack& stack);
PredictionHead zeros_like(const PredictionHead& head);

}  // namespace ltpnet
