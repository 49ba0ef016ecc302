#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "tlab/network.hpp"
#include "tlab/tensor.hpp"

namespace tlab {

// Batch expectations of the three quadratic forms making up the energy of the
// last-layer error, phi = e_est + e_lab - 2 e_cross.
struct EnergyComponents {
  double phi_total = 0.0;
  double e_est = 0.0;    // E_N[yhat yhat^T]
  double e_lab = 0.0;    // E_N[y y^T]
  double e_cross = 0.0;  // E_N[yhat y^T]
};

struct EnergyReport {
  long step = 0;
  double phi_total = 0.0;
  double e_est = 0.0;
  double e_lab = 0.0;
  double e_cross = 0.0;
  double noise_fraction_pct = 0.0;  // NaN when phi_total == 0
  double delta_prev_energy = 0.0;   // mean of squared elements of dL/dX^L
  double var_xL = 0.0;
  double loss = 0.0;
  double accuracy = 0.0;
};

EnergyComponents energy_decomposition(const Tensor& probs, const Tensor& labels);

// phi as the sum over output neurons of E_N[(N delta^L_j)^2].
double phi_from_delta(const Tensor& delta_last);

// Percentage of the error energy carried by the estimate-energy term.
double noise_fraction(const EnergyComponents& c);

// (1/C, 1): range of E_N[yhat yhat^T] for row-stochastic estimates.
std::pair<double, double> estimate_energy_bounds(std::size_t classes);

// Mean squared element of the error that leaves the head toward the layers below.
double boundary_error_energy(const BackwardTrace& bt);

struct VarianceHistory {
  std::vector<long> steps;
  std::vector<double> variances;

  std::size_t size() const noexcept { return variances.size(); }
};

// Appends the variance of the head input recorded in `trace`.
void track_var_xL(const ForwardTrace& trace, VarianceHistory& history, long step);

EnergyReport make_energy_report(long step, const ForwardTrace& trace, const BackwardTrace& bt,
                                const Tensor& labels);

// Throws InvariantError if any decomposition identity or bound fails.
void check_report_invariants(const EnergyReport& report, std::size_t classes,
                             double tolerance = 1e-9);

}  // namespace tlab
