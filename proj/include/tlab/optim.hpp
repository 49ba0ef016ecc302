#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tlab/network.hpp"

namespace tlab {

enum class OptimizerKind { sgd, adam };
enum class TrainPhase { warmup, joint };

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Per-layer trainability. Layers without parameters are ignored.
struct ParamMask {
  std::vector<bool> trainable;

  bool operator[](std::size_t layer) const { return trainable.at(layer); }
};

// warmup: only augmented layers train. joint: everything trains.
ParamMask warmup_mask(const Network& net, TrainPhase phase);

// p <- p - lr * g
void sgd_step(std::span<double> params, std::span<const double> grads, double lr);

// One bias-corrected Adam update at step t (t >= 1) for a parameter block.
void adam_step(std::span<double> params, std::span<const double> grads, std::span<double> m,
               std::span<double> v, long t, double lr, const AdamConfig& cfg);

// Optimizer over all dense-layer parameters of a network. Must be reset
// against the network before the first step; head replacement calls for a
// fresh reset.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr, AdamConfig adam = {});

  void reset(const Network& net);
  void step(Network& net, const BackwardTrace& grads, const ParamMask& mask);

  OptimizerKind kind() const noexcept { return kind_; }
  double learning_rate() const noexcept { return lr_; }
  long steps() const noexcept { return t_; }
  bool initialized() const noexcept { return initialized_; }

 private:
  struct Moments {
    Tensor m_w, v_w, m_b, v_b;
  };

  OptimizerKind kind_;
  double lr_;
  AdamConfig adam_;
  long t_ = 0;
  bool initialized_ = false;
  std::vector<Moments> moments_;
};

}  // namespace tlab
