#include "tlab/telemetry.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <fmt/format.h>

#include "tlab/errors.hpp"

namespace tlab {

EnergyComponents energy_decomposition(const Tensor& probs, const Tensor& labels) {
  if (probs.rank() != 2 || probs.shape() != labels.shape()) {
    throw DimensionError("energy_decomposition: estimates " + shape_string(probs.shape()) +
                         " vs labels " + shape_string(labels.shape()));
  }
  const std::size_t n = probs.rows(), c = probs.cols();
  double est = 0.0, lab = 0.0, cross = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      const double p = probs(i, j), y = labels(i, j);
      est += p * p;
      lab += y * y;
      cross += p * y;
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  EnergyComponents out;
  out.e_est = est * inv_n;
  out.e_lab = lab * inv_n;
  out.e_cross = cross * inv_n;
  out.phi_total = out.e_est + out.e_lab - 2.0 * out.e_cross;
  return out;
}

double phi_from_delta(const Tensor& delta_last) {
  const std::size_t n = delta_last.rows();
  const double scale = static_cast<double>(n);
  double total = 0.0;
  for (double d : delta_last.values()) {
    const double e = scale * d;
    total += e * e;
  }
  return total / scale;
}

double noise_fraction(const EnergyComponents& c) {
  if (!(c.phi_total > 0.0)) {
    throw ArgumentError("noise fraction undefined: total error energy is zero");
  }
  return 100.0 * c.e_est / c.phi_total;
}

std::pair<double, double> estimate_energy_bounds(std::size_t classes) {
  return {1.0 / static_cast<double>(classes), 1.0};
}

double boundary_error_energy(const BackwardTrace& bt) {
  if (bt.head == 0 || bt.input_grads.size() <= bt.head || bt.input_grads[bt.head].empty()) {
    throw StateError("no layer below the head: boundary error is undefined");
  }
  return mean_square(bt.input_grads[bt.head]);
}

void track_var_xL(const ForwardTrace& trace, VarianceHistory& history, long step) {
  if (trace.inputs.empty()) throw StateError("forward trace holds no head input");
  history.steps.push_back(step);
  history.variances.push_back(reduce_stats(trace.head_input()).variance);
}

EnergyReport make_energy_report(long step, const ForwardTrace& trace, const BackwardTrace& bt,
                                const Tensor& labels) {
  EnergyReport r;
  r.step = step;
  const EnergyComponents c = energy_decomposition(trace.probs, labels);
  r.phi_total = c.phi_total;
  r.e_est = c.e_est;
  r.e_lab = c.e_lab;
  r.e_cross = c.e_cross;
  r.noise_fraction_pct =
      c.phi_total > 0.0 ? noise_fraction(c) : std::numeric_limits<double>::quiet_NaN();
  r.delta_prev_energy = boundary_error_energy(bt);
  r.var_xL = reduce_stats(trace.head_input()).variance;
  r.loss = ce_loss_from_logits(trace.logits, labels);
  r.accuracy = accuracy(trace.logits, labels);
  return r;
}

void check_report_invariants(const EnergyReport& r, std::size_t classes, double tol) {
  auto fail = [&](const std::string& what) {
    throw InvariantError(fmt::format("step {}: {} (phi={:.17g} e_est={:.17g} e_lab={:.17g} "
                                     "e_cross={:.17g})",
                                     r.step, what, r.phi_total, r.e_est, r.e_lab, r.e_cross));
  };
  if (std::abs(r.phi_total - (r.e_est + r.e_lab - 2.0 * r.e_cross)) > tol) {
    fail("decomposition identity violated");
  }
  if (r.phi_total < -tol || r.phi_total > 2.0 + tol) fail("phi outside [0, 2]");
  if (std::abs(r.e_lab - 1.0) > tol) fail("label energy is not 1");
  if (r.e_cross < -tol || r.e_cross > 1.0 + tol) fail("cross energy outside [0, 1]");
  const auto [lo, hi] = estimate_energy_bounds(classes);
  if (r.e_est < lo - tol || r.e_est > hi + tol) fail("estimate energy outside [1/C, 1]");
  if (!std::isfinite(r.loss)) fail("loss is not finite");
}

}  // namespace tlab
