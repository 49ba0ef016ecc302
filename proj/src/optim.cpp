#include "tlab/optim.hpp"

#include <cmath>
#include <string>

#include "tlab/errors.hpp"

namespace tlab {

ParamMask warmup_mask(const Network& net, TrainPhase phase) {
  ParamMask mask;
  mask.trainable.reserve(net.layers.size());
  for (const auto& layer : net.layers) {
    mask.trainable.push_back(phase == TrainPhase::joint || layer.tag == ParamTag::augmented);
  }
  return mask;
}

void sgd_step(std::span<double> params, std::span<const double> grads, double lr) {
  if (params.size() != grads.size()) {
    throw DimensionError("sgd_step: " + std::to_string(params.size()) + " parameters vs " +
                         std::to_string(grads.size()) + " gradients");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double d = lr * grads[i];
    if (d != 0.0) params[i] -= d;
  }
}

void adam_step(std::span<double> params, std::span<const double> grads, std::span<double> m,
               std::span<double> v, long t, double lr, const AdamConfig& cfg) {
  if (params.size() != grads.size() || m.size() != params.size() || v.size() != params.size()) {
    throw DimensionError("adam_step: parameter, gradient and moment sizes differ");
  }
  if (t < 1) throw StateError("adam_step: step counter must start at 1");
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = m[i] / c1;
    const double v_hat = v[i] / c2;
    const double d = lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    if (d != 0.0) params[i] -= d;
  }
}

Optimizer::Optimizer(OptimizerKind kind, double lr, AdamConfig adam)
    : kind_(kind), lr_(lr), adam_(adam) {
  if (!(lr >= 0.0)) throw ArgumentError("learning rate must be >= 0");
}

void Optimizer::reset(const Network& net) {
  moments_.assign(net.layers.size(), Moments{});
  if (kind_ == OptimizerKind::adam) {
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      const Layer& layer = net.layers[l];
      if (!layer.is_dense()) continue;
      moments_[l] = Moments{Tensor(layer.weight.shape()), Tensor(layer.weight.shape()),
                            Tensor(layer.bias.shape()), Tensor(layer.bias.shape())};
    }
  }
  t_ = 0;
  initialized_ = true;
}

void Optimizer::step(Network& net, const BackwardTrace& grads, const ParamMask& mask) {
  if (!initialized_) throw StateError("optimizer used before reset()");
  if (moments_.size() != net.layers.size() || mask.trainable.size() != net.layers.size() ||
      grads.weight_grads.size() != net.layers.size()) {
    throw StateError("optimizer state does not match the network; reset after changing layers");
  }
  ++t_;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    Layer& layer = net.layers[l];
    if (!layer.is_dense() || !mask[l]) continue;
    const Tensor& gw = grads.weight_grads[l];
    const Tensor& gb = grads.bias_grads[l];
    if (gw.shape() != layer.weight.shape() || gb.shape() != layer.bias.shape()) {
      throw DimensionError("gradient shape mismatch in layer " + std::to_string(l));
    }
    if (kind_ == OptimizerKind::sgd) {
      sgd_step(layer.weight.values(), gw.values(), lr_);
      sgd_step(layer.bias.values(), gb.values(), lr_);
    } else {
      Moments& mo = moments_[l];
      if (mo.m_w.shape() != layer.weight.shape()) {
        throw StateError("adam moments do not match layer " + std::to_string(l));
      }
      adam_step(layer.weight.values(), gw.values(), mo.m_w.values(), mo.v_w.values(), t_, lr_,
                adam_);
      adam_step(layer.bias.values(), gb.values(), mo.m_b.values(), mo.v_b.values(), t_, lr_,
                adam_);
    }
  }
}

}  // namespace tlab
