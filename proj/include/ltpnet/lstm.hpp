#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ltpnet/rng.hpp"
#include "ltpnet/tensor.hpp"

namespace ltpnet {

/// Weights of one peephole LSTM layer.
///
/// Gate pre-activations for g in {input, forget, output} read
///   W_xg x_t + W_hg h_{t-1} + W_cg c_{t-1} + b_g
/// with *full* H x H peephole matrices W_cg, and the output gate peeks at
/// c_{t-1} rather than c_t. Both differ from the usual diagonal, c_t-based
/// peephole formulation. The candidate is tanh(W_xc x_t + W_hc h_{t-1} + b_c).
struct LstmLayerParams {
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;

  Tensor w_xi, w_hi, w_ci, b_i;
  Tensor w_xf, w_hf, w_cf, b_f;
  Tensor w_xo, w_ho, w_co, b_o;
  Tensor w_xc, w_hc, b_c;

  static constexpr std::size_t kTensorCount = 15;
  static constexpr std::array<std::string_view, kTensorCount> kTensorNames = {
      "w_xi", "w_hi", "w_ci", "b_i", "w_xf", "w_hf", "w_cf", "b_f",
      "w_xo", "w_ho", "w_co", "b_o", "w_xc", "w_hc", "b_c"};

  std::array<Tensor*, kTensorCount> tensors();
  std::array<const Tensor*, kTensorCount> tensors() const;

  static LstmLayerParams zeros(std::size_t input_size, std::size_t hidden_size);
  /// Weights uniform in [-1/sqrt(H), 1/sqrt(H)], biases zero.
  static LstmLayerParams random(std::size_t input_size, std::size_t hidden_size, SeededRng& rng);

  std::size_t parameter_count() const;
  /// Throws ShapeError if any tensor disagrees with (input_size, hidden_size).
  void validate() const;
};

struct LstmState {
  std::vector<double> h;
  std::vector<double> c;

  static LstmState zeros(std::size_t hidden_size) {
    return {std::vector<double>(hidden_size, 0.0), std::vector<double>(hidden_size, 0.0)};
  }
};

/// Everything the backward pass needs from one time step.
struct LstmStepCache {
  std::vector<double> x;
  std::vector<double> h_prev, c_prev;
  std::vector<double> input_gate, forget_gate, output_gate, candidate;
  std::vector<double> c, tanh_c, h;
};

struct LstmLayerCache {
  std::vector<LstmStepCache> steps;
};

struct LstmCellOutput {
  LstmState state;
  LstmStepCache cache;
};

LstmCellOutput lstm_cell_forward(std::span<const double> x, const LstmState& prev,
                                 const LstmLayerParams& params);

struct LstmSequenceOutput {
  Tensor hidden;                      // L x H of the top layer
  std::vector<LstmState> final_states;  // one per layer
  std::vector<LstmLayerCache> caches;   // one per layer
};

/// Runs the stack over an L x F window; layer k consumes the full hidden
/// sequence of layer k-1. Missing initial states default to zero.
LstmSequenceOutput lstm_sequence_forward(const Tensor& window, std::span<const LstmLayerParams> stack,
                                         std::span<const LstmState> initial_states = {});

/// Backpropagation through time. `grad_hidden` is dLoss/d(top hidden
/// sequence), L x H. Parameter gradients are added into `grads` (same layout
/// as `stack`); the return value is dLoss/d(window), L x F.
Tensor lstm_backward_accumulate(std::span<const LstmLayerCache> caches, const Tensor& grad_hidden,
                                std::span<const LstmLayerParams> stack,
                                std::span<LstmLayerParams> grads);

struct LstmGradients {
  std::vector<LstmLayerParams> params;
  Tensor input;
};
LstmGradients lstm_backward(std::span<const LstmLayerCache> caches, const Tensor& grad_hidden,
                            std::span<const LstmLayerParams> stack);

std::vector<LstmLayerParams> zeros_like(std::span<const LstmLayerParams> stack);

}  // namespace ltpnet
