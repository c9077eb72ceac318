#include "ltpnet/optim.hpp"

#include <algorithm>
#include <cmath>

#include "ltpnet/errors.hpp"

namespace ltpnet {

namespace {

void check_slot(const ParamSlot& s) {
  if (!s.value || !s.grad) throw ShapeError("optimizer slot without tensor");
  check_same_shape(*s.value, *s.grad, "optimizer step");
}

}  // namespace

std::vector<ParamSlot> make_slots(ModelParams& params, const ModelParams& grads, const LearningRates& rates) {
  auto values = parameter_tensors(params);
  const auto gs = parameter_tensors(grads);
  if (values.size() != gs.size()) throw ShapeError("gradient structure does not match parameters");
  std::vector<ParamSlot> slots;
  slots.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double lr = values[i].group == ParamGroup::lstm ? rates.lstm : rates.transformer;
    slots.push_back({values[i].tensor, gs[i].tensor, lr});
  }
  return slots;
}

LossResult mse_loss(std::span<const double> pred, std::span<const double> target) {
  if (pred.empty()) throw DataError("mse_loss: empty input");
  if (pred.size() != target.size()) throw ShapeError("mse_loss: prediction and target lengths differ");
  const double n = static_cast<double>(pred.size());
  LossResult out;
  out.gradient.resize(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - target[i];
    out.loss += e * e;
    out.gradient[i] = 2.0 * e / n;
  }
  out.loss /= n;
  return out;
}

double global_norm(const ModelParams& grads) {
  double sq = 0.0;
  for (const auto& ref : parameter_tensors(grads))
    for (double v : ref.tensor->data()) sq += v * v;
  return std::sqrt(sq);
}

double clip_global_norm(ModelParams& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (auto& ref : parameter_tensors(grads))
      for (double& v : ref.tensor->data()) v *= s;
  }
  return norm;
}

void sgd_step(std::span<const ParamSlot> slots) {
  for (const auto& s : slots) {
    check_slot(s);
    axpy_inplace(*s.value, -s.learning_rate, *s.grad);
  }
}

void adam_step(std::span<const ParamSlot> slots, AdamState& state, const AdamSettings& settings) {
  if (state.m.empty()) {
    for (const auto& s : slots) {
      state.m.push_back(Tensor::zeros_like(*s.value));
      state.v.push_back(Tensor::zeros_like(*s.value));
    }
  }
  if (state.m.size() != slots.size()) throw ShapeError("adam_step: state does not match parameters");
  ++state.t;
  const double correction1 = 1.0 - std::pow(settings.beta1, static_cast<double>(state.t));
  const double correction2 = 1.0 - std::pow(settings.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto& s = slots[i];
    check_slot(s);
    check_same_shape(*s.value, state.m[i], "adam_step state");
    auto theta = s.value->data();
    const auto g = s.grad->data();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    for (std::size_t j = 0; j < theta.size(); ++j) {
      m[j] = settings.beta1 * m[j] + (1.0 - settings.beta1) * g[j];
      v[j] = settings.beta2 * v[j] + (1.0 - settings.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      theta[j] -= s.learning_rate * m_hat / (std::sqrt(v_hat) + settings.epsilon);
    }
  }
}

void adaptive_momentum_step(std::span<const ParamSlot> slots, MomentumState& state, const MomentumSettings& settings) {
  if (!state.initialized) {
    state.velocity.clear();
    for (const auto& s : slots) state.velocity.push_back(Tensor::zeros_like(*s.value));
    state.momentum = settings.initial;
    state.initialized = true;
  }
  if (state.velocity.size() != slots.size()) throw ShapeError("adaptive_momentum_step: state does not match parameters");
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto& s = slots[i];
    check_slot(s);
    check_same_shape(*s.value, state.velocity[i], "adaptive_momentum_step state");
    auto theta = s.value->data();
    const auto g = s.grad->data();
    auto vel = state.velocity[i].data();
    for (std::size_t j = 0; j < theta.size(); ++j) {
      vel[j] = state.momentum * vel[j] - s.learning_rate * g[j];
      theta[j] += vel[j];
    }
  }
}

void adapt_momentum(MomentumState& state, const MomentumSettings& settings) {
  state.momentum = std::min(settings.target, state.momentum + settings.update_rate * (settings.target - state.momentum));
}

std::string to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::adam: return "adam";
    case OptimizerKind::adaptive_momentum: return "adaptive-momentum";
  }
  return "unknown";
}

OptimizerKind optimizer_from_string(const std::string& name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adam") return OptimizerKind::adam;
  if (name == "adaptive-momentum") return OptimizerKind::adaptive_momentum;
  throw ConfigError("unknown optimizer '" + name + "' (expected sgd, adam or adaptive-momentum)");
}

Optimizer::Optimizer(OptimizerKind kind, LearningRates rates, AdamSettings adam, MomentumSettings momentum)
    : kind_(kind), rates_(rates), adam_settings_(adam), momentum_settings_(momentum) {
  momentum_.momentum = momentum.initial;
}

void Optimizer::step(ModelParams& params, const ModelParams& grads) {
  const auto slots = make_slots(params, grads, rates_);
  switch (kind_) {
    case OptimizerKind::sgd: sgd_step(slots); break;
    case OptimizerKind::adam: adam_step(slots, adam_, adam_settings_); break;
    case OptimizerKind::adaptive_momentum: adaptive_momentum_step(slots, momentum_, momentum_settings_); break;
  }
}

void Optimizer::end_epoch() {
  if (kind_ == OptimizerKind::adaptive_momentum) adapt_momentum(momentum_, momentum_settings_);
}

}  // namespace ltpnet
