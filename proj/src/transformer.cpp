#include "ltpnet/transformer.hpp"

#include <cmath>
#include <string>

#include "ltpnet/errors.hpp"

namespace ltpnet {

namespace {

void fill_uniform(Tensor& t, double bound, SeededRng& rng) {
  for (double& v : t.data()) v = rng.uniform(-bound, bound);
}

Tensor head_columns(const Tensor& m, std::size_t head, std::size_t d_head) {
  Tensor out({m.rows(), d_head});
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t j = 0; j < d_head; ++j) out(r, j) = m(r, head * d_head + j);
  return out;
}

void scatter_head_columns(Tensor& m, const Tensor& block, std::size_t head) {
  const std::size_t d_head = block.cols();
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t j = 0; j < d_head; ++j) m(r, head * d_head + j) = block(r, j);
}

void require_cols(const Tensor& x, std::size_t cols, const char* what) {
  if (x.rank() != 2 || x.cols() != cols) {
    throw ShapeError(std::string(what) + ": input " + x.shape_string() + " needs " + std::to_string(cols) +
                     " columns");
  }
}

}  // namespace

std::array<Tensor*, EncoderLayerParams::kTensorCount> EncoderLayerParams::tensors() {
  return {&w_q, &w_k, &w_v, &w_o, &w_1, &b_1, &w_2, &b_2, &ln1_gain, &ln1_bias, &ln2_gain, &ln2_bias};
}

std::array<const Tensor*, EncoderLayerParams::kTensorCount> EncoderLayerParams::tensors() const {
  return {&w_q, &w_k, &w_v, &w_o, &w_1, &b_1, &w_2, &b_2, &ln1_gain, &ln1_bias, &ln2_gain, &ln2_bias};
}

EncoderLayerParams EncoderLayerParams::zeros(std::size_t d_model, std::size_t heads, std::size_t d_ff) {
  if (d_model == 0 || heads == 0 || d_ff == 0) throw ShapeError("encoder layer sizes must be positive");
  if (d_model % heads != 0) {
    throw ShapeError("d_model " + std::to_string(d_model) + " is not divisible by " + std::to_string(heads) +
                     " heads");
  }
  EncoderLayerParams p;
  p.d_model = d_model;
  p.heads = heads;
  p.d_ff = d_ff;
  for (Tensor* w : {&p.w_q, &p.w_k, &p.w_v, &p.w_o}) *w = Tensor({d_model, d_model});
  p.w_1 = Tensor({d_model, d_ff});
  p.b_1 = Tensor({d_ff});
  p.w_2 = Tensor({d_ff, d_model});
  p.b_2 = Tensor({d_model});
  p.ln1_gain = Tensor({d_model}, 1.0);
  p.ln1_bias = Tensor({d_model});
  p.ln2_gain = Tensor({d_model}, 1.0);
  p.ln2_bias = Tensor({d_model});
  return p;
}

EncoderLayerParams EncoderLayerParams::random(std::size_t d_model, std::size_t heads, std::size_t d_ff,
                                              SeededRng& rng) {
  auto p = zeros(d_model, heads, d_ff);
  const double model_bound = 1.0 / std::sqrt(static_cast<double>(d_model));
  const double ff_bound = 1.0 / std::sqrt(static_cast<double>(d_ff));
  for (Tensor* w : {&p.w_q, &p.w_k, &p.w_v, &p.w_o, &p.w_1}) fill_uniform(*w, model_bound, rng);
  fill_uniform(p.w_2, ff_bound, rng);
  return p;
}

void EncoderLayerParams::validate() const {
  const auto expect = [](const Tensor& t, std::vector<std::size_t> shape, std::string_view name) {
    if (t.shape() != shape)
      throw ShapeError("encoder parameter " + std::string(name) + " has shape " + t.shape_string() +
                       ", expected " + shape_string(shape));
  };
  if (heads == 0 || d_model % heads != 0) throw ShapeError("d_model must be a multiple of the head count");
  const auto ts = tensors();
  const std::vector<std::vector<std::size_t>> shapes = {
      {d_model, d_model}, {d_model, d_model}, {d_model, d_model}, {d_model, d_model}, {d_model, d_ff},
      {d_ff},             {d_ff, d_model},    {d_model},          {d_model},          {d_model},
      {d_model},          {d_model}};
  for (std::size_t k = 0; k < kTensorCount; ++k) expect(*ts[k], shapes[k], kTensorNames[k]);
}

Tensor positional_encoding(std::size_t seq_len, std::size_t d_model) {
  if (seq_len == 0 || d_model == 0) throw ShapeError("positional_encoding: sizes must be positive");
  if (d_model % 2 != 0) throw ShapeError("positional_encoding: d_model must be even, got " + std::to_string(d_model));
  Tensor pe({seq_len, d_model});
  for (std::size_t pos = 0; pos < seq_len; ++pos) {
    for (std::size_t i = 0; i < d_model / 2; ++i) {
      const double angle = static_cast<double>(pos) /
                           std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(d_model));
      pe(pos, 2 * i) = std::sin(angle);
      pe(pos, 2 * i + 1) = std::cos(angle);
    }
  }
  return pe;
}

EncoderStack EncoderStack::zeros(std::size_t input_size, std::size_t d_model, std::size_t layers,
                                 std::size_t heads, std::size_t d_ff, std::size_t max_len) {
  if (input_size == 0 || d_model == 0 || max_len == 0) throw ShapeError("encoder stack sizes must be positive");
  EncoderStack s;
  s.input_size = input_size;
  s.d_model = d_model;
  s.max_len = max_len;
  s.w_in = Tensor({input_size, d_model});
  s.b_in = Tensor({d_model});
  for (std::size_t l = 0; l < layers; ++l) s.layers.push_back(EncoderLayerParams::zeros(d_model, heads, d_ff));
  s.positional = positional_encoding(max_len, d_model);
  return s;
}

EncoderStack EncoderStack::random(std::size_t input_size, std::size_t d_model, std::size_t layers,
                                  std::size_t heads, std::size_t d_ff, std::size_t max_len, SeededRng& rng) {
  auto s = zeros(input_size, d_model, 0, heads, d_ff, max_len);
  fill_uniform(s.w_in, 1.0 / std::sqrt(static_cast<double>(input_size)), rng);
  for (std::size_t l = 0; l < layers; ++l) s.layers.push_back(EncoderLayerParams::random(d_model, heads, d_ff, rng));
  return s;
}

std::size_t EncoderStack::parameter_count() const {
  std::size_t n = w_in.size() + b_in.size();
  for (const auto& layer : layers)
    for (const Tensor* t : layer.tensors()) n += t->size();
  return n;
}

std::array<Tensor*, PredictionHead::kTensorCount> PredictionHead::tensors() { return {&w_a, &b_a, &w_b, &b_b}; }

std::array<const Tensor*, PredictionHead::kTensorCount> PredictionHead::tensors() const {
  return {&w_a, &b_a, &w_b, &b_b};
}

PredictionHead PredictionHead::zeros(std::size_t d_model, std::size_t width) {
  if (d_model == 0 || width == 0) throw ShapeError("prediction head sizes must be positive");
  PredictionHead h;
  h.d_model = d_model;
  h.width = width;
  h.w_a = Tensor({d_model, width});
  h.b_a = Tensor({width});
  h.w_b = Tensor({width, 1});
  h.b_b = Tensor({1});
  return h;
}

PredictionHead PredictionHead::random(std::size_t d_model, std::size_t width, SeededRng& rng) {
  auto h = zeros(d_model, width);
  fill_uniform(h.w_a, 1.0 / std::sqrt(static_cast<double>(d_model)), rng);
  fill_uniform(h.w_b, 1.0 / std::sqrt(static_cast<double>(width)), rng);
  return h;
}

std::size_t PredictionHead::parameter_count() const { return w_a.size() + b_a.size() + w_b.size() + b_b.size(); }

AttentionResult scaled_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2) throw ShapeError("scaled_attention: operands must be matrices");
  if (q.cols() != k.cols())
    throw ShapeError("scaled_attention: query " + q.shape_string() + " and key " + k.shape_string() + " widths differ");
  if (k.rows() != v.rows())
    throw ShapeError("scaled_attention: key " + k.shape_string() + " and value " + v.shape_string() + " lengths differ");
  Tensor scores = matmul_transposed_b(q, k);
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  for (double& s : scores.data()) s *= inv_scale;
  AttentionResult out;
  out.weights = softmax(scores, -1);
  out.output = matmul(out.weights, v);
  return out;
}

Tensor multi_head_attention(const Tensor& x, const EncoderLayerParams& p, AttentionCache* cache) {
  require_cols(x, p.d_model, "multi_head_attention");
  const std::size_t d_head = p.d_head();
  const Tensor q = matmul(x, p.w_q);
  const Tensor k = matmul(x, p.w_k);
  const Tensor v = matmul(x, p.w_v);
  Tensor concat({x.rows(), p.d_model});
  if (cache) {
    cache->x = x;
    cache->q.clear();
    cache->k.clear();
    cache->v.clear();
    cache->weights.clear();
  }
  for (std::size_t h = 0; h < p.heads; ++h) {
    Tensor qh = head_columns(q, h, d_head);
    Tensor kh = head_columns(k, h, d_head);
    Tensor vh = head_columns(v, h, d_head);
    auto att = scaled_attention(qh, kh, vh);
    scatter_head_columns(concat, att.output, h);
    if (cache) {
      cache->q.push_back(std::move(qh));
      cache->k.push_back(std::move(kh));
      cache->v.push_back(std::move(vh));
      cache->weights.push_back(std::move(att.weights));
    }
  }
  Tensor out = matmul(concat, p.w_o);
  if (cache) cache->concat = std::move(concat);
  return out;
}

Tensor feed_forward(const Tensor& x, const Tensor& w_1, const Tensor& b_1, const Tensor& w_2, const Tensor& b_2,
                    FeedForwardCache* cache) {
  if (w_1.cols() != b_1.size() || w_2.rows() != w_1.cols() || w_2.cols() != b_2.size())
    throw ShapeError("feed_forward: inconsistent parameter shapes");
  Tensor hidden = matmul(x, w_1);
  add_row_bias(hidden, b_1);
  for (double& v : hidden.data()) v = v > 0.0 ? v : 0.0;
  Tensor out = matmul(hidden, w_2);
  add_row_bias(out, b_2);
  if (cache) {
    cache->x = x;
    cache->hidden = std::move(hidden);
  }
  return out;
}

Tensor layer_norm_cached(const Tensor& x, const Tensor& gain, const Tensor& bias, LayerNormCache& cache) {
  const std::size_t width = x.cols();
  if (gain.size() != width || bias.size() != width) throw ShapeError("layer_norm: gain/bias width mismatch");
  cache.normalized = Tensor(x.shape());
  cache.inv_std.assign(x.rows(), 0.0);
  Tensor y(x.shape());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto in = x.row(r);
    double mean = 0.0;
    for (double v : in) mean += v;
    mean /= static_cast<double>(width);
    double var = 0.0;
    for (double v : in) var += (v - mean) * (v - mean);
    var /= static_cast<double>(width);
    const double inv_std = 1.0 / std::sqrt(var + kLayerNormEpsilon);
    cache.inv_std[r] = inv_std;
    auto norm = cache.normalized.row(r);
    auto out = y.row(r);
    for (std::size_t j = 0; j < width; ++j) {
      norm[j] = (in[j] - mean) * inv_std;
      out[j] = norm[j] * gain[j] + bias[j];
    }
  }
  return y;
}

Tensor layer_norm_backward(const LayerNormCache& cache, const Tensor& gain, const Tensor& grad_out,
                           Tensor& grad_gain, Tensor& grad_bias) {
  const std::size_t width = grad_out.cols();
  const double n = static_cast<double>(width);
  Tensor dx(grad_out.shape());
  std::vector<double> dnorm(width);
  for (std::size_t r = 0; r < grad_out.rows(); ++r) {
    const auto dy = grad_out.row(r);
    const auto norm = cache.normalized.row(r);
    double mean_d = 0.0, mean_dn = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
      grad_gain[j] += dy[j] * norm[j];
      grad_bias[j] += dy[j];
      dnorm[j] = dy[j] * gain[j];
      mean_d += dnorm[j];
      mean_dn += dnorm[j] * norm[j];
    }
    mean_d /= n;
    mean_dn /= n;
    auto out = dx.row(r);
    for (std::size_t j = 0; j < width; ++j) out[j] = cache.inv_std[r] * (dnorm[j] - mean_d - norm[j] * mean_dn);
  }
  return dx;
}

EncoderLayerOutput encoder_layer_forward(const Tensor& x, const EncoderLayerParams& p) {
  require_cols(x, p.d_model, "encoder_layer_forward");
  EncoderLayerOutput out;
  auto& c = out.cache;
  Tensor sum1 = add(x, multi_head_attention(x, p, &c.attention));
  Tensor y1 = layer_norm_cached(sum1, p.ln1_gain, p.ln1_bias, c.norm1);
  Tensor sum2 = add(y1, feed_forward(y1, p.w_1, p.b_1, p.w_2, p.b_2, &c.ff));
  out.output = layer_norm_cached(sum2, p.ln2_gain, p.ln2_bias, c.norm2);
  return out;
}

Tensor encoder_layer_backward(const EncoderLayerCache& c, const EncoderLayerParams& p, const Tensor& grad_out,
                              EncoderLayerParams& g) {
  // Second sub-block: y2 = LN2(y1 + FF(y1)).
  Tensor d_sum2 = layer_norm_backward(c.norm2, p.ln2_gain, grad_out, g.ln2_gain, g.ln2_bias);
  Tensor d_y1 = d_sum2;
  {
    add_inplace(g.w_2, matmul_transposed_a(c.ff.hidden, d_sum2));
    column_sum_accumulate(d_sum2, g.b_2);
    Tensor d_hidden = matmul_transposed_b(d_sum2, p.w_2);
    auto dh = d_hidden.data();
    const auto hv = c.ff.hidden.data();
    for (std::size_t i = 0; i < dh.size(); ++i)
      if (hv[i] <= 0.0) dh[i] = 0.0;
    add_inplace(g.w_1, matmul_transposed_a(c.ff.x, d_hidden));
    column_sum_accumulate(d_hidden, g.b_1);
    add_inplace(d_y1, matmul_transposed_b(d_hidden, p.w_1));
  }

  // First sub-block: y1 = LN1(x + MHA(x)).
  Tensor d_sum1 = layer_norm_backward(c.norm1, p.ln1_gain, d_y1, g.ln1_gain, g.ln1_bias);
  Tensor dx = d_sum1;
  const auto& a = c.attention;
  add_inplace(g.w_o, matmul_transposed_a(a.concat, d_sum1));
  const Tensor d_concat = matmul_transposed_b(d_sum1, p.w_o);

  const std::size_t seq = a.x.rows();
  const std::size_t d_head = p.d_head();
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(d_head));
  Tensor dq({seq, p.d_model}), dk({seq, p.d_model}), dv({seq, p.d_model});
  for (std::size_t h = 0; h < p.heads; ++h) {
    const Tensor d_out = head_columns(d_concat, h, d_head);
    const Tensor& w = a.weights[h];
    scatter_head_columns(dv, matmul_transposed_a(w, d_out), h);
    Tensor d_w = matmul_transposed_b(d_out, a.v[h]);
    // Softmax Jacobian, row by row.
    for (std::size_t i = 0; i < seq; ++i) {
      auto dw = d_w.row(i);
      const auto wr = w.row(i);
      double dot = 0.0;
      for (std::size_t j = 0; j < seq; ++j) dot += dw[j] * wr[j];
      for (std::size_t j = 0; j < seq; ++j) dw[j] = wr[j] * (dw[j] - dot) * inv_scale;
    }
    scatter_head_columns(dq, matmul(d_w, a.k[h]), h);
    scatter_head_columns(dk, matmul_transposed_a(d_w, a.q[h]), h);
  }
  add_inplace(g.w_q, matmul_transposed_a(a.x, dq));
  add_inplace(g.w_k, matmul_transposed_a(a.x, dk));
  add_inplace(g.w_v, matmul_transposed_a(a.x, dv));
  add_inplace(dx, matmul_transposed_b(dq, p.w_q));
  add_inplace(dx, matmul_transposed_b(dk, p.w_k));
  add_inplace(dx, matmul_transposed_b(dv, p.w_v));
  return dx;
}

EncoderStackOutput encoder_stack_forward(const Tensor& hidden, const EncoderStack& stack) {
  require_cols(hidden, stack.input_size, "encoder_stack_forward");
  if (hidden.rows() > stack.max_len) {
    throw ShapeError("encoder_stack_forward: sequence of length " + std::to_string(hidden.rows()) +
                     " exceeds positional table length " + std::to_string(stack.max_len));
  }
  EncoderStackOutput out;
  out.cache.input = hidden;
  Tensor x = matmul(hidden, stack.w_in);
  add_row_bias(x, stack.b_in);
  if (stack.use_positional) {
    for (std::size_t r = 0; r < x.rows(); ++r) {
      auto row = x.row(r);
      const auto pe = stack.positional.row(r);
      for (std::size_t j = 0; j < row.size(); ++j) row[j] += pe[j];
    }
  }
  out.cache.layers.reserve(stack.layers.size());
  for (const auto& layer : stack.layers) {
    auto res = encoder_layer_forward(x, layer);
    x = std::move(res.output);
    out.cache.layers.push_back(std::move(res.cache));
  }
  out.output = std::move(x);
  return out;
}

Tensor encoder_stack_backward(const EncoderStackCache& cache, const EncoderStack& stack, const Tensor& grad_out,
                              EncoderStack& grads) {
  if (cache.layers.size() != stack.layers.size() || grads.layers.size() != stack.layers.size())
    throw ShapeError("encoder_stack_backward: cache/params/grads layer counts differ");
  Tensor d = grad_out;
  for (std::size_t l = stack.layers.size(); l-- > 0;)
    d = encoder_layer_backward(cache.layers[l], stack.layers[l], d, grads.layers[l]);
  // The positional table is an additive constant: gradient passes straight through.
  add_inplace(grads.w_in, matmul_transposed_a(cache.input, d));
  column_sum_accumulate(d, grads.b_in);
  return matmul_transposed_b(d, stack.w_in);
}

double predict(const Tensor& encoded, const PredictionHead& head, HeadCache* cache) {
  require_cols(encoded, head.d_model, "predict");
  const std::size_t seq = encoded.rows();
  std::vector<double> pooled(head.d_model, 0.0);
  for (std::size_t r = 0; r < seq; ++r) {
    const auto row = encoded.row(r);
    for (std::size_t j = 0; j < head.d_model; ++j) pooled[j] += row[j];
  }
  for (double& v : pooled) v /= static_cast<double>(seq);

  std::vector<double> hidden(head.b_a.data().begin(), head.b_a.data().end());
  for (std::size_t i = 0; i < head.d_model; ++i) {
    const auto w = head.w_a.row(i);
    for (std::size_t j = 0; j < head.width; ++j) hidden[j] += pooled[i] * w[j];
  }
  double y = head.b_b[0];
  for (std::size_t j = 0; j < head.width; ++j) {
    hidden[j] = hidden[j] > 0.0 ? hidden[j] : 0.0;
    y += hidden[j] * head.w_b[j];
  }
  if (cache) {
    cache->seq_len = seq;
    cache->pooled = std::move(pooled);
    cache->hidden = std::move(hidden);
  }
  return y;
}

Tensor predict_backward(const HeadCache& cache, const PredictionHead& head, double grad_out, PredictionHead& g) {
  if (cache.pooled.size() != head.d_model || cache.hidden.size() != head.width)
    throw ShapeError("predict_backward: cache does not match head");
  g.b_b[0] += grad_out;
  std::vector<double> d_hidden(head.width);
  for (std::size_t j = 0; j < head.width; ++j) {
    g.w_b[j] += grad_out * cache.hidden[j];
    d_hidden[j] = cache.hidden[j] > 0.0 ? grad_out * head.w_b[j] : 0.0;
    g.b_a[j] += d_hidden[j];
  }
  outer_accumulate(g.w_a, cache.pooled, d_hidden);
  const Tensor d_pooled = matvec(head.w_a, d_hidden);
  Tensor d_encoded({cache.seq_len, head.d_model});
  const double inv_seq = 1.0 / static_cast<double>(cache.seq_len);
  for (std::size_t r = 0; r < cache.seq_len; ++r) {
    auto row = d_encoded.row(r);
    for (std::size_t j = 0; j < head.d_model; ++j) row[j] = d_pooled[j] * inv_seq;
  }
  return d_encoded;
}

EncoderStack zeros_like(const EncoderStack& stack) {
  EncoderStack g = stack;
  g.w_in.fill(0.0);
  g.b_in.fill(0.0);
  for (auto& layer : g.layers)
    for (Tensor* t : layer.tensors()) t->fill(0.0);
  g.positional.fill(0.0);
  return g;
}

PredictionHead zeros_like(const PredictionHead& head) {
  PredictionHead g = head;
  for (Tensor* t : g.tensors()) t->fill(0.0);
  return g;
}

TransformerGradients transformer_backward(const TransformerCache& cache, const EncoderStack& stack,
                                          const PredictionHead& head, double grad_out) {
  TransformerGradients out{zeros_like(stack), zeros_like(head), Tensor()};
  const Tensor d_encoded = predict_backward(cache.head, head, grad_out, out.head);
  out.input = encoder_stack_backward(cache.encoder, stack, d_encoded, out.encoder);
  return out;
}

}  // namespace ltpnet
