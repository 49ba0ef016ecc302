#pragma once

#include <cstddef>

#include "tlab/network.hpp"

namespace tlab {

class SeededRng;

enum class InitKind { he_fan_in, he_fan_out, mei, zeros };

// Initialization policy for a dense layer. Biases start at zero for every kind.
struct InitSpec {
  InitKind kind = InitKind::he_fan_out;
  double gain = 2.0;      // m; 2 for ReLU networks
  double gamma = 1e-4;    // initial learning rate (mei)
  double lambda = 0.1;    // noise-proportion hyper-parameter (mei)
  std::size_t classes = 0;

  static InitSpec he_fan_in(double gain = 2.0);
  static InitSpec he_fan_out(double gain = 2.0);
  static InitSpec mei(double gamma, double lambda, std::size_t classes);
  // MEI with lambda solved so that the weight variance equals phi_w.
  static InitSpec mei_for_variance(double gamma, double phi_w, std::size_t classes);
  static InitSpec zeros();

  void validate() const;
};

// m / fan.
double he_variance(std::size_t fan, double gain);

// Variance of every weight of a maximum-entropy head: (gamma * lambda / C)^2.
double mei_variance(double gamma, double lambda, std::size_t classes);

// Inverse of mei_variance in lambda.
double mei_lambda_for_variance(double gamma, double phi_w, std::size_t classes);

// Weight variance the spec prescribes for a layer with the given fans.
double weight_variance(const InitSpec& spec, std::size_t fan_in, std::size_t fan_out);

// W ~ N(0, weight_variance), b = 0.
Layer apply_init(Layer layer, const InitSpec& spec, SeededRng& rng);

}  // namespace tlab
