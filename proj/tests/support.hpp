#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "tlab/network.hpp"
#include "tlab/rng.hpp"
#include "tlab/tensor.hpp"

namespace tlab::testing {

// Plain triple loop; the reference every faster kernel is checked against.
inline Tensor naive_matmul(const Tensor& a, const Tensor& b) {
  Tensor out({a.rows(), b.cols()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  return out;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Loss of a train-mode pass, recomputed from the logits without the library's
// softmax so finite differences do not share code with backprop.
inline double reference_loss(Network& net, const Tensor& x, const std::vector<int>& labels) {
  const ForwardTrace t = forward(net, x, Mode::train);
  double total = 0.0;
  for (std::size_t i = 0; i < t.logits.rows(); ++i) {
    double mx = t.logits(i, 0);
    for (std::size_t j = 1; j < t.logits.cols(); ++j) mx = std::max(mx, t.logits(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < t.logits.cols(); ++j) z += std::exp(t.logits(i, j) - mx);
    total += std::log(z) + mx - t.logits(i, static_cast<std::size_t>(labels[i]));
  }
  return total / static_cast<double>(t.logits.rows());
}

// dense(in,h1) relu dense(h1,h2) feature_norm dense(h2,c), all weights N(0, 1/fan_in).
inline Network small_fn_net(SeededRng& rng, std::size_t in, std::size_t h1, std::size_t h2,
                            std::size_t c) {
  auto dense = [&](std::size_t a, std::size_t b) {
    Layer l = Layer::dense(a, b);
    l.weight = normal_sample(rng, {b, a}, 0.0, 1.0 / static_cast<double>(a));
    l.bias = normal_sample(rng, {1, b}, 0.0, 0.01);
    return l;
  };
  Network net;
  net.layers = {dense(in, h1), Layer::relu(), dense(h1, h2), Layer::feature_norm(h2),
                dense(h2, c)};
  return net;
}

inline std::filesystem::path fresh_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("tlab_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(TLAB_FIXTURE_DIR) / name;
}

}  // namespace tlab::testing
