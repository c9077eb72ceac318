#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ltpnet/model.hpp"
#include "ltpnet/tensor.hpp"

namespace ltpnet {

/// One learnable tensor, its gradient and the learning rate applied to it.
struct ParamSlot {
  Tensor* value;
  const Tensor* grad;
  double learning_rate;
};

struct LearningRates {
  double lstm = 0.001;
  double transformer = 0.0001;
};

/// Pairs every tensor of `params` with the matching tensor of `grads`.
std::vector<ParamSlot> make_slots(ModelParams& params, const ModelParams& grads, const LearningRates& rates);

struct LossResult {
  double loss = 0.0;
  std::vector<double> gradient;
};
/// Mean squared error and its gradient with respect to `pred`.
LossResult mse_loss(std::span<const double> pred, std::span<const double> target);

/// Scales every gradient so the global L2 norm is at most max_norm; returns
/// the norm before scaling.
double clip_global_norm(ModelParams& grads, double max_norm);
double global_norm(const ModelParams& grads);

/// theta <- theta - lr * g
void sgd_step(std::span<const ParamSlot> slots);

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};
struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::size_t t = 0;
};
/// Bias-corrected Adam. State tensors are created on the first call.
void adam_step(std::span<const ParamSlot> slots, AdamState& state, const AdamSettings& settings = {});

struct MomentumSettings {
  double initial = 0.9;
  double update_rate = 0.1;
  double target = 0.99;
};
struct MomentumState {
  std::vector<Tensor> velocity;
  double momentum = 0.9;
  bool initialized = false;
};
/// velocity <- mu * velocity - lr * g;  theta <- theta + velocity.
void adaptive_momentum_step(std::span<const ParamSlot> slots, MomentumState& state,
                            const MomentumSettings& settings = {});
/// mu <- min(target, mu + rate * (target - mu)), applied once per epoch.
void adapt_momentum(MomentumState& state, const MomentumSettings& settings = {});

enum class OptimizerKind { sgd, adam, adaptive_momentum };
std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_from_string(const std::string& name);

/// Stateful wrapper used by the training loop.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, LearningRates rates, AdamSettings adam = {}, MomentumSettings momentum = {});

  void step(ModelParams& params, const ModelParams& grads);
  void end_epoch();
  OptimizerKind kind() const { return kind_; }
  const LearningRates& rates() const { return rates_; }

 private:
  OptimizerKind kind_;
  LearningRates rates_;
  AdamSettings adam_settings_;
  MomentumSettings momentum_settings_;
  AdamState adam_;
  MomentumState momentum_;
};

}  // namespace ltpnet
