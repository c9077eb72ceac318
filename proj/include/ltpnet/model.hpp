#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ltpnet/hyperparams.hpp"
#include "ltpnet/lstm.hpp"
#include "ltpnet/rng.hpp"
#include "ltpnet/tensor.hpp"
#include "ltpnet/transformer.hpp"

namespace ltpnet {

/// Component a learnable tensor belongs to; each has its own learning rate.
enum class ParamGroup { lstm, transformer };

struct ModelConfig {
  std::size_t input_features = 1;
  std::size_t lookback = 24;
  std::size_t lstm_hidden = 128;
  std::size_t lstm_layers = 2;
  std::size_t d_model = 256;
  std::size_t heads = 8;
  std::size_t encoder_layers = 6;
  std::size_t d_ff = 1024;
  std::size_t head_width = 64;
  /// false: window rows are projected straight into the encoder.
  bool lstm_enabled = true;
  /// false: the final LSTM hidden state is projected and fed to the head.
  bool transformer_enabled = true;

  /// Architecture for a hyperparameter point; d_ff = d_ff_multiplier * d_model.
  static ModelConfig from_hyperparams(const HyperparamPoint& hp, std::size_t input_features, std::size_t lookback,
                                      std::size_t lstm_layers = 2, std::size_t head_width = 64,
                                      std::size_t d_ff_multiplier = 4);
  void validate() const;
};

/// All learnable weights: LSTM stack, encoder stack (input projection and
/// layers), prediction head.
struct ModelParams {
  ModelConfig config;
  std::vector<LstmLayerParams> lstm;
  EncoderStack encoder;
  PredictionHead head;

  static ModelParams random(const ModelConfig& config, SeededRng& rng);
  static ModelParams zeros(const ModelConfig& config);
};

struct ParamRef {
  std::string name;
  ParamGroup group;
  Tensor* tensor;
};
struct ConstParamRef {
  std::string name;
  ParamGroup group;
  const Tensor* tensor;
};

/// Every learnable tensor in a fixed order (positional table excluded).
std::vector<ParamRef> parameter_tensors(ModelParams& params);
std::vector<ConstParamRef> parameter_tensors(const ModelParams& params);

/// Same architecture, all learnables zero (layer-norm gains included).
ModelParams zero_gradients_like(const ModelParams& params);

struct ForwardCache {
  std::optional<LstmSequenceOutput> lstm;
  TransformerCache transformer;
};

struct ForwardResult {
  double prediction = 0.0;
  ForwardCache cache;
};

/// Full model on one L x F window.
ForwardResult forward_full(const Tensor& window, const ModelParams& params);
double predict_window(const Tensor& window, const ModelParams& params);

/// Adds dLoss/dtheta into `grads` given dLoss/dprediction; returns dLoss/dwindow.
Tensor backward_full(const ForwardCache& cache, const ModelParams& params, double grad_prediction,
                     ModelParams& grads);

}  // namespace ltpnet
