#include "tlab/init.hpp"

#include <cmath>

#include "tlab/errors.hpp"
#include "tlab/rng.hpp"

namespace tlab {

InitSpec InitSpec::he_fan_in(double gain) {
  InitSpec s;
  s.kind = InitKind::he_fan_in;
  s.gain = gain;
  return s;
}

InitSpec InitSpec::he_fan_out(double gain) {
  InitSpec s;
  s.kind = InitKind::he_fan_out;
  s.gain = gain;
  return s;
}

InitSpec InitSpec::mei(double gamma, double lambda, std::size_t classes) {
  InitSpec s;
  s.kind = InitKind::mei;
  s.gamma = gamma;
  s.lambda = lambda;
  s.classes = classes;
  s.validate();
  return s;
}

InitSpec InitSpec::mei_for_variance(double gamma, double phi_w, std::size_t classes) {
  return mei(gamma, mei_lambda_for_variance(gamma, phi_w, classes), classes);
}

InitSpec InitSpec::zeros() {
  InitSpec s;
  s.kind = InitKind::zeros;
  return s;
}

void InitSpec::validate() const {
  switch (kind) {
    case InitKind::mei:
      if (!(gamma > 0.0)) throw ArgumentError("mei requires gamma > 0");
      if (!(lambda > 0.0)) throw ArgumentError("mei requires lambda > 0");
      if (classes < 2) throw ArgumentError("mei requires at least 2 classes");
      break;
    case InitKind::he_fan_in:
    case InitKind::he_fan_out:
      if (!(gain > 0.0)) throw ArgumentError("he initialization requires gain > 0");
      break;
    case InitKind::zeros:
      break;
  }
}

double he_variance(std::size_t fan, double gain) {
  if (fan == 0) throw ArgumentError("he_variance: fan must be positive");
  if (!(gain > 0.0)) throw ArgumentError("he_variance: gain must be positive");
  return gain / static_cast<double>(fan);
}

double mei_variance(double gamma, double lambda, std::size_t classes) {
  if (!(gamma > 0.0) || !(lambda > 0.0)) {
    throw ArgumentError("mei_variance: gamma and lambda must be positive");
  }
  if (classes < 2) throw ArgumentError("mei_variance: need at least 2 classes");
  const double r = gamma * lambda / static_cast<double>(classes);
  return r * r;
}

double mei_lambda_for_variance(double gamma, double phi_w, std::size_t classes) {
  if (!(gamma > 0.0) || !(phi_w > 0.0)) {
    throw ArgumentError("mei_lambda_for_variance: gamma and phi_w must be positive");
  }
  if (classes < 2) throw ArgumentError("mei_lambda_for_variance: need at least 2 classes");
  return static_cast<double>(classes) * std::sqrt(phi_w) / gamma;
}

double weight_variance(const InitSpec& spec, std::size_t fan_in, std::size_t fan_out) {
  spec.validate();
  switch (spec.kind) {
    case InitKind::he_fan_in:
      return he_variance(fan_in, spec.gain);
    case InitKind::he_fan_out:
      return he_variance(fan_out, spec.gain);
    case InitKind::mei:
      return mei_variance(spec.gamma, spec.lambda, spec.classes);
    case InitKind::zeros:
      return 0.0;
  }
  return 0.0;
}

Layer apply_init(Layer layer, const InitSpec& spec, SeededRng& rng) {
  if (!layer.is_dense()) {
    throw ArgumentError(std::string("apply_init: layer is ") + layer_kind_name(layer.kind) +
                        ", not dense");
  }
  const double var = weight_variance(spec, layer.fan_in(), layer.fan_out());
  layer.weight = normal_sample(rng, layer.weight.shape(), 0.0, var);
  layer.bias = Tensor(layer.bias.shape(), 0.0);
  return layer;
}

}  // namespace tlab
