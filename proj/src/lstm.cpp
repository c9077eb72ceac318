#include "ltpnet/lstm.hpp"

#include <cmath>
#include <string>

#include "ltpnet/errors.hpp"

namespace ltpnet {

namespace {

void add_into(std::vector<double>& acc, const Tensor& t) {
  for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += t[j];
}

std::vector<double> gate_preactivation(const Tensor& w_x, const Tensor& w_h, const Tensor* w_c,
                                       const Tensor& b, std::span<const double> x,
                                       const LstmState& prev) {
  std::vector<double> a(b.data().begin(), b.data().end());
  add_into(a, matvec(w_x, x));
  add_into(a, matvec(w_h, prev.h));
  if (w_c) add_into(a, matvec(*w_c, prev.c));
  return a;
}

void expect_shape(const Tensor& t, std::vector<std::size_t> shape, std::string_view name) {
  if (t.shape() != shape) {
    throw ShapeError("LSTM parameter " + std::string(name) + " has shape " + t.shape_string() +
                     ", expected " + shape_string(shape));
  }
}

}  // namespace

std::array<Tensor*, LstmLayerParams::kTensorCount> LstmLayerParams::tensors() {
  return {&w_xi, &w_hi, &w_ci, &b_i, &w_xf, &w_hf, &w_cf, &b_f,
          &w_xo, &w_ho, &w_co, &b_o, &w_xc, &w_hc, &b_c};
}

std::array<const Tensor*, LstmLayerParams::kTensorCount> LstmLayerParams::tensors() const {
  return {&w_xi, &w_hi, &w_ci, &b_i, &w_xf, &w_hf, &w_cf, &b_f,
          &w_xo, &w_ho, &w_co, &b_o, &w_xc, &w_hc, &b_c};
}

LstmLayerParams LstmLayerParams::zeros(std::size_t input_size, std::size_t hidden_size) {
  if (input_size == 0 || hidden_size == 0) throw ShapeError("LSTM sizes must be positive");
  LstmLayerParams p;
  p.input_size = input_size;
  p.hidden_size = hidden_size;
  const std::size_t h = hidden_size, f = input_size;
  for (Tensor* w : {&p.w_xi, &p.w_xf, &p.w_xo, &p.w_xc}) *w = Tensor({h, f});
  for (Tensor* w : {&p.w_hi, &p.w_hf, &p.w_ho, &p.w_hc, &p.w_ci, &p.w_cf, &p.w_co}) *w = Tensor({h, h});
  for (Tensor* b : {&p.b_i, &p.b_f, &p.b_o, &p.b_c}) *b = Tensor({h});
  return p;
}

LstmLayerParams LstmLayerParams::random(std::size_t input_size, std::size_t hidden_size, SeededRng& rng) {
  auto p = zeros(input_size, hidden_size);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_size));
  for (Tensor* t : p.tensors()) {
    if (t->rank() != 2) continue;
    for (double& v : t->data()) v = rng.uniform(-bound, bound);
  }
  return p;
}

std::size_t LstmLayerParams::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor* t : tensors()) n += t->size();
  return n;
}

void LstmLayerParams::validate() const {
  const std::size_t h = hidden_size, f = input_size;
  const auto names = kTensorNames;
  const auto ts = tensors();
  for (std::size_t k = 0; k < kTensorCount; ++k) {
    const auto name = names[k];
    if (name.starts_with("b_")) expect_shape(*ts[k], {h}, name);
    else if (name.starts_with("w_x")) expect_shape(*ts[k], {h, f}, name);
    else expect_shape(*ts[k], {h, h}, name);
  }
}

LstmCellOutput lstm_cell_forward(std::span<const double> x, const LstmState& prev,
                                 const LstmLayerParams& p) {
  const std::size_t h = p.hidden_size;
  if (x.size() != p.input_size) {
    throw ShapeError("lstm_cell_forward: input of length " + std::to_string(x.size()) +
                     " for layer with input size " + std::to_string(p.input_size));
  }
  if (prev.h.size() != h || prev.c.size() != h) {
    throw ShapeError("lstm_cell_forward: state size differs from hidden size " + std::to_string(h));
  }

  LstmCellOutput out;
  auto& cache = out.cache;
  cache.x.assign(x.begin(), x.end());
  cache.h_prev = prev.h;
  cache.c_prev = prev.c;
  cache.input_gate = gate_preactivation(p.w_xi, p.w_hi, &p.w_ci, p.b_i, x, prev);
  cache.forget_gate = gate_preactivation(p.w_xf, p.w_hf, &p.w_cf, p.b_f, x, prev);
  cache.output_gate = gate_preactivation(p.w_xo, p.w_ho, &p.w_co, p.b_o, x, prev);
  cache.candidate = gate_preactivation(p.w_xc, p.w_hc, nullptr, p.b_c, x, prev);
  cache.c.resize(h);
  cache.tanh_c.resize(h);
  cache.h.resize(h);
  for (std::size_t j = 0; j < h; ++j) {
    cache.input_gate[j] = sigmoid(cache.input_gate[j]);
    cache.forget_gate[j] = sigmoid(cache.forget_gate[j]);
    cache.output_gate[j] = sigmoid(cache.output_gate[j]);
    cache.candidate[j] = std::tanh(cache.candidate[j]);
    cache.c[j] = cache.forget_gate[j] * prev.c[j] + cache.input_gate[j] * cache.candidate[j];
    cache.tanh_c[j] = std::tanh(cache.c[j]);
    cache.h[j] = cache.output_gate[j] * cache.tanh_c[j];
  }
  out.state = {cache.h, cache.c};
  return out;
}

LstmSequenceOutput lstm_sequence_forward(const Tensor& window, std::span<const LstmLayerParams> stack,
                                         std::span<const LstmState> initial_states) {
  if (stack.empty()) throw ShapeError("lstm_sequence_forward: empty layer stack");
  if (window.rank() != 2) throw ShapeError("lstm_sequence_forward: window must be L x F, got " + window.shape_string());
  if (!initial_states.empty() && initial_states.size() != stack.size())
    throw ShapeError("lstm_sequence_forward: one initial state per layer required");
  if (window.cols() != stack.front().input_size) {
    throw ShapeError("lstm_sequence_forward: window " + window.shape_string() +
                     " does not match first layer input size " + std::to_string(stack.front().input_size));
  }
  for (std::size_t k = 1; k < stack.size(); ++k) {
    if (stack[k].input_size != stack[k - 1].hidden_size) {
      throw ShapeError("lstm_sequence_forward: layer " + std::to_string(k) + " expects input size " +
                       std::to_string(stack[k].input_size) + " but layer below has hidden size " +
                       std::to_string(stack[k - 1].hidden_size));
    }
  }

  const std::size_t steps = window.rows();
  LstmSequenceOutput out;
  Tensor input = window;
  for (std::size_t k = 0; k < stack.size(); ++k) {
    const auto& p = stack[k];
    LstmState state = initial_states.empty() ? LstmState::zeros(p.hidden_size) : initial_states[k];
    LstmLayerCache cache;
    cache.steps.reserve(steps);
    Tensor hidden({steps, p.hidden_size});
    for (std::size_t t = 0; t < steps; ++t) {
      auto cell = lstm_cell_forward(input.row(t), state, p);
      std::copy(cell.state.h.begin(), cell.state.h.end(), hidden.row(t).begin());
      state = std::move(cell.state);
      cache.steps.push_back(std::move(cell.cache));
    }
    out.final_states.push_back(std::move(state));
    out.caches.push_back(std::move(cache));
    input = std::move(hidden);
  }
  out.hidden = std::move(input);
  return out;
}

Tensor lstm_backward_accumulate(std::span<const LstmLayerCache> caches, const Tensor& grad_hidden,
                                std::span<const LstmLayerParams> stack, std::span<LstmLayerParams> grads) {
  if (caches.size() != stack.size() || grads.size() != stack.size())
    throw ShapeError("lstm_backward: cache/params/grads layer counts differ");
  if (stack.empty()) throw ShapeError("lstm_backward: empty layer stack");
  const std::size_t steps = caches.back().steps.size();
  if (grad_hidden.rows() != steps || grad_hidden.cols() != stack.back().hidden_size)
    throw ShapeError("lstm_backward: upstream gradient " + grad_hidden.shape_string() + " mismatches cache");

  Tensor upstream = grad_hidden;
  for (std::size_t layer = stack.size(); layer-- > 0;) {
    const auto& p = stack[layer];
    auto& g = grads[layer];
    const auto& cache = caches[layer];
    if (cache.steps.size() != steps) throw ShapeError("lstm_backward: cache lengths differ between layers");
    const std::size_t h = p.hidden_size;

    Tensor grad_input({steps, p.input_size});
    std::vector<double> dh_next(h, 0.0), dc_next(h, 0.0);
    std::vector<double> da_i(h), da_f(h), da_o(h), da_g(h);

    for (std::size_t t = steps; t-- > 0;) {
      const auto& s = cache.steps[t];
      if (s.x.size() != p.input_size || s.h.size() != h) throw ShapeError("lstm_backward: cache does not match params");
      const auto up = upstream.row(t);
      for (std::size_t j = 0; j < h; ++j) {
        const double dh = up[j] + dh_next[j];
        const double dc = dc_next[j] + dh * s.output_gate[j] * (1.0 - s.tanh_c[j] * s.tanh_c[j]);
        const double i = s.input_gate[j], f = s.forget_gate[j], o = s.output_gate[j], cand = s.candidate[j];
        da_o[j] = dh * s.tanh_c[j] * o * (1.0 - o);
        da_i[j] = dc * cand * i * (1.0 - i);
        da_f[j] = dc * s.c_prev[j] * f * (1.0 - f);
        da_g[j] = dc * i * (1.0 - cand * cand);
        dc_next[j] = dc * f;
      }

      outer_accumulate(g.w_xi, da_i, s.x);
      outer_accumulate(g.w_xf, da_f, s.x);
      outer_accumulate(g.w_xo, da_o, s.x);
      outer_accumulate(g.w_xc, da_g, s.x);
      outer_accumulate(g.w_hi, da_i, s.h_prev);
      outer_accumulate(g.w_hf, da_f, s.h_prev);
      outer_accumulate(g.w_ho, da_o, s.h_prev);
      outer_accumulate(g.w_hc, da_g, s.h_prev);
      outer_accumulate(g.w_ci, da_i, s.c_prev);
      outer_accumulate(g.w_cf, da_f, s.c_prev);
      outer_accumulate(g.w_co, da_o, s.c_prev);
      for (std::size_t j = 0; j < h; ++j) {
        g.b_i[j] += da_i[j];
        g.b_f[j] += da_f[j];
        g.b_o[j] += da_o[j];
        g.b_c[j] += da_g[j];
      }

      std::fill(dh_next.begin(), dh_next.end(), 0.0);
      matvec_transposed_accumulate(p.w_hi, da_i, dh_next);
      matvec_transposed_accumulate(p.w_hf, da_f, dh_next);
      matvec_transposed_accumulate(p.w_ho, da_o, dh_next);
      matvec_transposed_accumulate(p.w_hc, da_g, dh_next);
      // Peephole paths from c_{t-1} into the three gates.
      matvec_transposed_accumulate(p.w_ci, da_i, dc_next);
      matvec_transposed_accumulate(p.w_cf, da_f, dc_next);
      matvec_transposed_accumulate(p.w_co, da_o, dc_next);

      auto dx = grad_input.row(t);
      matvec_transposed_accumulate(p.w_xi, da_i, dx);
      matvec_transposed_accumulate(p.w_xf, da_f, dx);
      matvec_transposed_accumulate(p.w_xo, da_o, dx);
      matvec_transposed_accumulate(p.w_xc, da_g, dx);
    }
    upstream = std::move(grad_input);
  }
  return upstream;
}

std::vector<LstmLayerParams> zeros_like(std::span<const LstmLayerParams> stack) {
  std::vector<LstmLayerParams> out;
  out.reserve(stack.size());
  for (const auto& p : stack) out.push_back(LstmLayerParams::zeros(p.input_size, p.hidden_size));
  return out;
}

LstmGradients lstm_backward(std::span<const LstmLayerCache> caches, const Tensor& grad_hidden,
                            std::span<const LstmLayerParams> stack) {
  LstmGradients out;
  out.params = zeros_like(stack);
  out.input = lstm_backward_accumulate(caches, grad_hidden, stack, out.params);
  return out;
}

}  // namespace ltpnet
