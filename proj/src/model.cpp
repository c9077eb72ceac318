#include "ltpnet/model.hpp"

#include "ltpnet/errors.hpp"

namespace ltpnet {

namespace {

std::size_t encoder_input_size(const ModelConfig& c) { return c.lstm_enabled ? c.lstm_hidden : c.input_features; }

std::size_t encoder_max_len(const ModelConfig& c) { return c.transformer_enabled ? c.lookback : 1; }

template <class Ref, class Params>
std::vector<Ref> collect(Params& params) {
  std::vector<Ref> out;
  for (std::size_t l = 0; l < params.lstm.size(); ++l) {
    auto ts = params.lstm[l].tensors();
    for (std::size_t k = 0; k < ts.size(); ++k)
      out.push_back({"lstm." + std::to_string(l) + "." + std::string(LstmLayerParams::kTensorNames[k]),
                     ParamGroup::lstm, ts[k]});
  }
  if (!params.encoder.w_in.empty()) {
    out.push_back({"encoder.w_in", ParamGroup::transformer, &params.encoder.w_in});
    out.push_back({"encoder.b_in", ParamGroup::transformer, &params.encoder.b_in});
  }
  for (std::size_t l = 0; l < params.encoder.layers.size(); ++l) {
    auto ts = params.encoder.layers[l].tensors();
    for (std::size_t k = 0; k < ts.size(); ++k)
      out.push_back({"encoder." + std::to_string(l) + "." + std::string(EncoderLayerParams::kTensorNames[k]),
                     ParamGroup::transformer, ts[k]});
  }
  if (!params.head.w_a.empty()) {
    auto ts = params.head.tensors();
    for (std::size_t k = 0; k < ts.size(); ++k)
      out.push_back({"head." + std::string(PredictionHead::kTensorNames[k]), ParamGroup::transformer, ts[k]});
  }
  return out;
}

}  // namespace

ModelConfig ModelConfig::from_hyperparams(const HyperparamPoint& hp, std::size_t input_features, std::size_t lookback,
                                          std::size_t lstm_layers, std::size_t head_width,
                                          std::size_t d_ff_multiplier) {
  ModelConfig c;
  c.input_features = input_features;
  c.lookback = lookback;
  c.lstm_hidden = hp.lstm_hidden;
  c.lstm_layers = lstm_layers;
  c.d_model = hp.d_model;
  c.heads = hp.attention_heads;
  c.encoder_layers = hp.transformer_layers;
  c.d_ff = d_ff_multiplier * hp.d_model;
  c.head_width = head_width;
  return c;
}

void ModelConfig::validate() const {
  if (input_features == 0 || lookback == 0 || d_model == 0 || head_width == 0)
    throw ConfigError("model sizes must be positive");
  if (lstm_enabled && (lstm_hidden == 0 || lstm_layers == 0))
    throw ConfigError("an enabled LSTM needs at least one layer and one hidden unit");
  if (transformer_enabled) {
    if (heads == 0 || d_model % heads != 0) throw ConfigError("attention heads must divide d_model");
    if (d_model % 2 != 0) throw ConfigError("d_model must be even for the positional encoding");
    if (encoder_layers > 0 && d_ff == 0) throw ConfigError("feed-forward width must be positive");
  }
  if (!lstm_enabled && !transformer_enabled) throw ConfigError("at least one of LSTM and transformer must be enabled");
}

ModelParams ModelParams::random(const ModelConfig& config, SeededRng& rng) {
  config.validate();
  ModelParams p;
  p.config = config;
  if (config.lstm_enabled) {
    for (std::size_t l = 0; l < config.lstm_layers; ++l)
      p.lstm.push_back(LstmLayerParams::random(l == 0 ? config.input_features : config.lstm_hidden,
                                               config.lstm_hidden, rng));
  }
  const std::size_t layers = config.transformer_enabled ? config.encoder_layers : 0;
  p.encoder = EncoderStack::random(encoder_input_size(config), config.d_model, layers,
                                   config.transformer_enabled ? config.heads : 1, std::max<std::size_t>(config.d_ff, 1),
                                   encoder_max_len(config), rng);
  p.encoder.use_positional = config.transformer_enabled;
  p.head = PredictionHead::random(config.d_model, config.head_width, rng);
  return p;
}

ModelParams ModelParams::zeros(const ModelConfig& config) {
  config.validate();
  ModelParams p;
  p.config = config;
  if (config.lstm_enabled) {
    for (std::size_t l = 0; l < config.lstm_layers; ++l)
      p.lstm.push_back(LstmLayerParams::zeros(l == 0 ? config.input_features : config.lstm_hidden, config.lstm_hidden));
  }
  const std::size_t layers = config.transformer_enabled ? config.encoder_layers : 0;
  p.encoder = EncoderStack::zeros(encoder_input_size(config), config.d_model, layers,
                                  config.transformer_enabled ? config.heads : 1, std::max<std::size_t>(config.d_ff, 1),
                                  encoder_max_len(config));
  p.encoder.use_positional = config.transformer_enabled;
  p.head = PredictionHead::zeros(config.d_model, config.head_width);
  return p;
}

std::vector<ParamRef> parameter_tensors(ModelParams& params) { return collect<ParamRef>(params); }

std::vector<ConstParamRef> parameter_tensors(const ModelParams& params) { return collect<ConstParamRef>(params); }

ModelParams zero_gradients_like(const ModelParams& params) {
  ModelParams g;
  g.config = params.config;
  g.lstm = zeros_like(std::span<const LstmLayerParams>(params.lstm));
  g.encoder = zeros_like(params.encoder);
  g.head = zeros_like(params.head);
  return g;
}

ForwardResult forward_full(const Tensor& window, const ModelParams& params) {
  const auto& c = params.config;
  if (window.rank() != 2 || window.cols() != c.input_features) {
    throw ShapeError("forward_full: window " + window.shape_string() + " does not have " +
                     std::to_string(c.input_features) + " feature columns");
  }
  ForwardResult out;
  Tensor encoder_input;
  if (c.lstm_enabled) {
    out.cache.lstm = lstm_sequence_forward(window, params.lstm);
    if (c.transformer_enabled) {
      encoder_input = out.cache.lstm->hidden;
    } else {
      const auto last = out.cache.lstm->hidden.row(window.rows() - 1);
      encoder_input = Tensor({1, c.lstm_hidden}, std::vector<double>(last.begin(), last.end()));
    }
  } else {
    encoder_input = window;
  }
  auto encoded = encoder_stack_forward(encoder_input, params.encoder);
  out.cache.transformer.encoder = std::move(encoded.cache);
  out.prediction = predict(encoded.output, params.head, &out.cache.transformer.head);
  return out;
}

double predict_window(const Tensor& window, const ModelParams& params) { return forward_full(window, params).prediction; }

Tensor backward_full(const ForwardCache& cache, const ModelParams& params, double grad_prediction, ModelParams& grads) {
  const auto& c = params.config;
  const Tensor d_encoded = predict_backward(cache.transformer.head, params.head, grad_prediction, grads.head);
  Tensor d_input = encoder_stack_backward(cache.transformer.encoder, params.encoder, d_encoded, grads.encoder);
  if (!c.lstm_enabled) return d_input;
  if (!cache.lstm) throw ShapeError("backward_full: LSTM cache missing");

  const std::size_t steps = cache.lstm->hidden.rows();
  Tensor d_hidden;
  if (c.transformer_enabled) {
    d_hidden = std::move(d_input);
  } else {
    d_hidden = Tensor({steps, c.lstm_hidden});
    const auto src = d_input.row(0);
    std::copy(src.begin(), src.end(), d_hidden.row(steps - 1).begin());
  }
  return lstm_backward_accumulate(cache.lstm->caches, d_hidden, params.lstm, grads.lstm);
}

}  // namespace ltpnet
