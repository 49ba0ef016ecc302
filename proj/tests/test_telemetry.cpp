#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "tlab/errors.hpp"
#include "tlab/init.hpp"
#include "tlab/telemetry.hpp"

using namespace tlab;

namespace {

// Random row-stochastic estimates with varied sharpness.
Tensor random_probs(SeededRng& rng, std::size_t n, std::size_t c) {
  const double temperature = std::exp(rng.uniform() * 8.0 - 4.0);
  return softmax(normal_sample(rng, {n, c}, 0.0, temperature));
}

std::vector<int> random_labels(SeededRng& rng, std::size_t n, std::size_t c) {
  std::vector<int> out(n);
  for (auto& v : out) v = static_cast<int>(rng.below(c));
  return out;
}

}  // namespace

TEST_CASE("perfect and confidently wrong estimates bracket the error energy") {
  const Tensor y = one_hot({0, 2}, 3);
  const EnergyComponents perfect = energy_decomposition(y, y);
  CHECK(perfect.phi_total == 0.0);
  CHECK(perfect.e_est == 1.0);
  CHECK(perfect.e_cross == 1.0);
  const EnergyComponents wrong = energy_decomposition(one_hot({1, 0}, 3), y);
  CHECK(wrong.phi_total == 2.0);
  CHECK(wrong.e_cross == 0.0);
  CHECK_THROWS_AS(noise_fraction(perfect), ArgumentError);
}

TEST_CASE("uniform estimates over 10 classes") {
  const Tensor probs({8, 10}, 0.1);
  const Tensor y = one_hot({0, 1, 2, 3, 4, 5, 6, 7}, 10);
  const EnergyComponents c = energy_decomposition(probs, y);
  CHECK(std::abs(c.e_est - 0.1) < 1e-15);
  CHECK(c.e_lab == 1.0);
  CHECK(std::abs(c.e_cross - 0.1) < 1e-15);
  CHECK(std::abs(c.phi_total - 0.9) < 1e-15);
  CHECK(std::abs(noise_fraction(c) - 100.0 / 9.0) < 1e-12);
}

TEST_CASE("energy identity and bounds hold on random estimates") {
  SeededRng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t c = 2 + rng.below(30), n = 1 + rng.below(20);
    const Tensor p = random_probs(rng, n, c);
    const Tensor y = one_hot(random_labels(rng, n, c), c);
    const EnergyComponents e = energy_decomposition(p, y);
    CHECK(std::abs(e.phi_total - (e.e_est + 1.0 - 2.0 * e.e_cross)) < 1e-12);
    CHECK(e.phi_total >= -1e-15);
    CHECK(e.phi_total <= 2.0 + 1e-15);
    CHECK(e.e_est >= 1.0 / static_cast<double>(c) - 1e-15);
    CHECK(e.e_est <= 1.0 + 1e-15);

    Tensor delta = p;
    for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = (p[i] - y[i]) / static_cast<double>(n);
    CHECK(std::abs(phi_from_delta(delta) - e.phi_total) < 1e-10);
  }
}

TEST_CASE("Monte Carlo estimate energies never leave [1/C, 1]") {
  SeededRng rng(32);
  for (std::size_t c : {2u, 10u, 100u}) {
    const auto [lo, hi] = estimate_energy_bounds(c);
    CHECK(lo == 1.0 / static_cast<double>(c));
    CHECK(hi == 1.0);
    double seen_lo = 2.0, seen_hi = 0.0;
    for (int i = 0; i < 300; ++i) {
      const Tensor p = random_probs(rng, 1, c);
      double s = 0.0;
      for (double v : p.values()) s += v * v;
      seen_lo = std::min(seen_lo, s);
      seen_hi = std::max(seen_hi, s);
    }
    CHECK(seen_lo >= lo - 1e-15);
    CHECK(seen_hi <= hi + 1e-15);
  }
}

TEST_CASE("boundary error energy is zero for a zero head and undefined for a head-only net") {
  SeededRng rng(33);
  Network net = make_architecture("mlp", 10, 4, rng);
  net.head() = apply_init(net.head(), InitSpec::zeros(), rng);
  const Tensor x = normal_sample(rng, {6, 10}, 0.0, 1.0);
  const Tensor y = one_hot({0, 1, 2, 3, 0, 1}, 4);
  const BackwardTrace bt = backward(net, forward(net, x, Mode::train), y);
  CHECK(boundary_error_energy(bt) == 0.0);

  Network head_only;
  head_only.layers = {apply_init(Layer::dense(10, 4), InitSpec::he_fan_out(), rng)};
  const BackwardTrace ho = backward(head_only, forward(head_only, x, Mode::train), y);
  CHECK_THROWS_AS(boundary_error_energy(ho), StateError);
}

TEST_CASE("var_xL history and energy report") {
  SeededRng rng(34);
  Network net = replace_head(make_architecture("mlp", 10, 4, rng), 4,
                             InitSpec::mei(1e-4, 0.1, 4), false, rng);
  const Tensor x = normal_sample(rng, {16, 10}, 0.0, 1.0);
  std::vector<int> labels(16);
  for (std::size_t i = 0; i < 16; ++i) labels[i] = static_cast<int>(i % 4);
  const Tensor y = one_hot(labels, 4);
  const ForwardTrace t = forward(net, x, Mode::train);
  VarianceHistory h;
  track_var_xL(t, h, 0);
  track_var_xL(t, h, 1);
  CHECK(h.size() == 2);
  CHECK(h.variances[0] == reduce_stats(t.head_input()).variance);

  const EnergyReport r = make_energy_report(0, t, backward(net, t, y), y);
  CHECK(std::abs(r.loss - std::log(4.0)) < 1e-3);
  CHECK(std::abs(r.noise_fraction_pct - 100.0 / 3.0) < 0.1);
  CHECK(r.var_xL == h.variances[0]);
  CHECK_NOTHROW(check_report_invariants(r, 4));

  EnergyReport broken = r;
  broken.e_cross += 0.1;
  CHECK_THROWS_AS(check_report_invariants(broken, 4), InvariantError);
  broken = r;
  broken.e_est = 0.1;
  broken.phi_total = broken.e_est + broken.e_lab - 2.0 * broken.e_cross;
  CHECK_THROWS_AS(check_report_invariants(broken, 4), InvariantError);
}
