#include "tlab/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tlab/errors.hpp"
#include "tlab/init.hpp"
#include "tlab/rng.hpp"

namespace tlab {

Layer Layer::dense(std::size_t in, std::size_t out, ParamTag tag) {
  Layer l;
  l.kind = LayerKind::dense;
  l.tag = tag;
  l.weight = Tensor({out, in});
  l.bias = Tensor({1, out});
  return l;
}

Layer Layer::relu(ParamTag tag) {
  Layer l;
  l.kind = LayerKind::relu;
  l.tag = tag;
  return l;
}

Layer Layer::feature_norm(std::size_t features, ParamTag tag) {
  if (features == 0) throw ArgumentError("feature_norm needs at least one feature");
  Layer l;
  l.kind = LayerKind::feature_norm;
  l.tag = tag;
  l.width = features;
  l.norm.running_mean = Tensor({1, features}, 0.0);
  l.norm.running_var = Tensor({1, features}, 1.0);
  return l;
}

Layer Layer::flatten(ParamTag tag) {
  Layer l;
  l.kind = LayerKind::flatten;
  l.tag = tag;
  return l;
}

const char* layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::dense: return "dense";
    case LayerKind::relu: return "relu";
    case LayerKind::feature_norm: return "feature_norm";
    case LayerKind::flatten: return "flatten";
  }
  return "?";
}

std::size_t Network::head_index() const {
  if (layers.empty() || !layers.back().is_dense()) {
    throw StateError("network must end in a dense classification layer");
  }
  return layers.size() - 1;
}

Tensor softmax(const Tensor& logits) {
  Tensor out = logits;
  const std::size_t n = logits.rows(), c = logits.cols();
  for (std::size_t i = 0; i < n; ++i) {
    auto r = out.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double sum = 0.0;
    for (double& v : r) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (std::size_t j = 0; j < c; ++j) r[j] /= sum;
  }
  return out;
}

void require_one_hot(const Tensor& labels) {
  if (labels.rank() != 2) throw ArgumentError("labels must be an N x C matrix");
  for (std::size_t i = 0; i < labels.rows(); ++i) {
    int ones = 0;
    for (double v : labels.row(i)) {
      if (v == 1.0) {
        ++ones;
      } else if (v != 0.0) {
        throw ArgumentError("labels row " + std::to_string(i) + " is not one-hot");
      }
    }
    if (ones != 1) throw ArgumentError("labels row " + std::to_string(i) + " is not one-hot");
  }
}

Tensor one_hot(const std::vector<int>& labels, std::size_t classes) {
  if (labels.empty()) throw ArgumentError("one_hot of an empty label list");
  Tensor y({labels.size(), classes});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int c = labels[i];
    if (c < 0 || static_cast<std::size_t>(c) >= classes) {
      throw ArgumentError("label " + std::to_string(c) + " out of range");
    }
    y(i, static_cast<std::size_t>(c)) = 1.0;
  }
  return y;
}

std::vector<int> argmax_rows(const Tensor& t) {
  std::vector<int> out(t.rows());
  for (std::size_t i = 0; i < t.rows(); ++i) {
    auto r = t.row(i);
    out[i] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return out;
}

double accuracy(const Tensor& scores, const Tensor& labels) {
  if (scores.shape() != labels.shape()) throw DimensionError("accuracy: shape mismatch");
  const auto pred = argmax_rows(scores);
  const auto truth = argmax_rows(labels);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == truth[i];
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

double ce_loss(const Tensor& probs, const Tensor& labels) {
  if (probs.shape() != labels.shape()) {
    throw DimensionError("ce_loss: estimates " + shape_string(probs.shape()) + " vs labels " +
                         shape_string(labels.shape()));
  }
  require_one_hot(labels);
  const auto truth = argmax_rows(labels);
  double total = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    total -= std::log(probs(i, static_cast<std::size_t>(truth[i])));
  }
  return total / static_cast<double>(truth.size());
}

double ce_loss_from_logits(const Tensor& logits, const Tensor& labels) {
  if (logits.shape() != labels.shape()) throw DimensionError("ce_loss_from_logits: shape mismatch");
  require_one_hot(labels);
  const auto truth = argmax_rows(labels);
  double total = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    auto r = logits.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double sum = 0.0;
    for (double v : r) sum += std::exp(v - mx);
    total += mx + std::log(sum) - r[static_cast<std::size_t>(truth[i])];
  }
  return total / static_cast<double>(truth.size());
}

Tensor feature_norm_forward(const Tensor& x, FeatureNormState& state, NormMode mode,
                            FeatureNormCache* cache) {
  if (x.rank() != 2) throw DimensionError("feature_norm expects N x K input");
  const std::size_t n = x.rows(), k = x.cols();
  if (state.running_mean.size() != k) {
    throw DimensionError("feature_norm: input " + shape_string(x.shape()) + " vs " +
                         std::to_string(state.running_mean.size()) + " features");
  }
  Tensor out({n, k});

  if (mode == NormMode::running_stats) {
    if (!state.initialized) throw StateError("feature_norm has no running statistics yet");
    for (std::size_t f = 0; f < k; ++f) {
      if (!(state.running_var[f] + kFeatureNormEpsilon > 0.0)) {
        throw StateError("feature_norm running variance must be >= 0");
      }
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t f = 0; f < k; ++f)
        out(i, f) = state.scale * (x(i, f) - state.running_mean[f]) /
                    std::sqrt(state.running_var[f] + kFeatureNormEpsilon);
    return out;
  }

  if (n < 2) throw ArgumentError("feature_norm batch statistics need at least 2 examples");
  std::vector<double> mean(k, 0.0), var(k, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t f = 0; f < k; ++f) mean[f] += x(i, f);
  for (auto& m : mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t f = 0; f < k; ++f) {
      const double d = x(i, f) - mean[f];
      var[f] += d * d;
    }
  for (auto& v : var) v /= static_cast<double>(n);

  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  std::vector<double> inv_std(k);
  for (std::size_t f = 0; f < k; ++f) inv_std[f] = 1.0 / std::sqrt(var[f] + kFeatureNormEpsilon);

  Tensor standardized({n, k});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t f = 0; f < k; ++f) {
      const double z = (x(i, f) - mean[f]) * inv_std[f];
      standardized(i, f) = z;
      out(i, f) = scale * z;
    }

  if (!state.initialized) {
    for (std::size_t f = 0; f < k; ++f) {
      state.running_mean[f] = mean[f];
      state.running_var[f] = var[f];
    }
    state.initialized = true;
  } else {
    for (std::size_t f = 0; f < k; ++f) {
      state.running_mean[f] =
          kFeatureNormMomentum * state.running_mean[f] + (1.0 - kFeatureNormMomentum) * mean[f];
      state.running_var[f] =
          kFeatureNormMomentum * state.running_var[f] + (1.0 - kFeatureNormMomentum) * var[f];
    }
  }
  state.scale = scale;

  if (cache) {
    cache->standardized = std::move(standardized);
    cache->inv_std = std::move(inv_std);
    cache->scale = scale;
  }
  return out;
}

Tensor feature_norm_backward(const Tensor& grad_out, const FeatureNormCache& cache) {
  const Tensor& z = cache.standardized;
  if (z.empty() || grad_out.shape() != z.shape()) {
    throw StateError("feature_norm backward needs the batch-statistics cache of its forward pass");
  }
  const std::size_t n = z.rows(), k = z.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  Tensor grad_in({n, k});
  for (std::size_t f = 0; f < k; ++f) {
    double sum_g = 0.0, sum_gz = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double g = cache.scale * grad_out(i, f);
      sum_g += g;
      sum_gz += g * z(i, f);
    }
    const double mean_g = sum_g * inv_n, mean_gz = sum_gz * inv_n;
    for (std::size_t i = 0; i < n; ++i) {
      const double g = cache.scale * grad_out(i, f);
      grad_in(i, f) = cache.inv_std[f] * (g - mean_g - z(i, f) * mean_gz);
    }
  }
  return grad_in;
}

namespace {

Tensor as_matrix(const Tensor& x) {
  if (x.rank() == 2) return x;
  return x.reshaped({x.rows(), x.cols()});
}

void check_finite(const Tensor& t, std::size_t index, const Layer& layer) {
  if (!t.all_finite()) {
    throw NumericError("non-finite activation in layer " + std::to_string(index) + " (" +
                       layer_kind_name(layer.kind) + ")");
  }
}

}  // namespace

ForwardTrace forward(Network& net, const Tensor& x, Mode mode) {
  net.head_index();
  if (x.empty()) throw DimensionError("forward: empty input batch");
  ForwardTrace trace;
  trace.mode = mode;
  trace.batch = x.rows();
  trace.inputs.reserve(net.layers.size());
  trace.outputs.reserve(net.layers.size());
  trace.norm_cache.resize(net.layers.size());

  Tensor current = x;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    Layer& layer = net.layers[l];
    Tensor out;
    switch (layer.kind) {
      case LayerKind::flatten:
        out = as_matrix(current);
        break;
      case LayerKind::dense: {
        if (current.rank() != 2 || current.cols() != layer.fan_in()) {
          throw DimensionError("layer " + std::to_string(l) + " (dense " +
                               std::to_string(layer.fan_in()) + " -> " +
                               std::to_string(layer.fan_out()) + ") got input " +
                               shape_string(current.shape()));
        }
        out = matmul_bt(current, layer.weight);
        const std::size_t m = out.cols();
        for (std::size_t i = 0; i < out.rows(); ++i)
          for (std::size_t j = 0; j < m; ++j) out(i, j) += layer.bias[j];
        break;
      }
      case LayerKind::relu:
        out = current;
        for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
        break;
      case LayerKind::feature_norm: {
        if (current.rank() != 2) {
          throw DimensionError("layer " + std::to_string(l) + " (feature_norm) got input " +
                               shape_string(current.shape()));
        }
        const NormMode nm = mode == Mode::train ? NormMode::batch_stats : NormMode::running_stats;
        out = feature_norm_forward(current, layer.norm, nm,
                                   mode == Mode::train ? &trace.norm_cache[l] : nullptr);
        break;
      }
    }
    check_finite(out, l, layer);
    trace.inputs.push_back(std::move(current));
    current = out;
    trace.outputs.push_back(std::move(out));
  }
  trace.logits = current;
  trace.probs = softmax(trace.logits);
  return trace;
}

BackwardTrace backward(const Network& net, const ForwardTrace& trace, const Tensor& labels) {
  if (trace.mode != Mode::train) throw StateError("backward needs a train-mode forward trace");
  const std::size_t count = net.layers.size();
  if (trace.inputs.size() != count || trace.outputs.size() != count ||
      trace.norm_cache.size() != count || trace.probs.empty()) {
    throw StateError("forward trace is missing tensors for this network");
  }
  if (labels.shape() != trace.probs.shape()) {
    throw DimensionError("backward: labels " + shape_string(labels.shape()) + " vs estimates " +
                         shape_string(trace.probs.shape()));
  }
  require_one_hot(labels);

  BackwardTrace bt;
  bt.head = net.head_index();
  bt.output_grads.resize(count);
  bt.input_grads.resize(count);
  bt.weight_grads.resize(count);
  bt.bias_grads.resize(count);

  const double n = static_cast<double>(trace.batch);
  Tensor delta = trace.probs;
  for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = (trace.probs[i] - labels[i]) / n;

  for (std::size_t l = count; l-- > 0;) {
    const Layer& layer = net.layers[l];
    const Tensor& x = trace.inputs[l];
    bt.output_grads[l] = delta;
    Tensor grad_in;
    switch (layer.kind) {
      case LayerKind::dense: {
        bt.weight_grads[l] = matmul_at(delta, x);
        Tensor db({1, layer.fan_out()});
        for (std::size_t i = 0; i < delta.rows(); ++i)
          for (std::size_t j = 0; j < delta.cols(); ++j) db[j] += delta(i, j);
        bt.bias_grads[l] = std::move(db);
        if (l > 0) grad_in = matmul(delta, layer.weight);
        break;
      }
      case LayerKind::relu:
        if (l > 0) {
          grad_in = delta;
          for (std::size_t i = 0; i < grad_in.size(); ++i) {
            if (!(x[i] > 0.0)) grad_in[i] = 0.0;
          }
        }
        break;
      case LayerKind::feature_norm:
        if (l > 0) grad_in = feature_norm_backward(delta, trace.norm_cache[l]);
        break;
      case LayerKind::flatten:
        if (l > 0) grad_in = delta.reshaped(x.shape());
        break;
    }
    if (l == 0) break;
    bt.input_grads[l] = grad_in;
    delta = std::move(grad_in);
  }
  return bt;
}

Network replace_head(Network net, std::size_t classes, const InitSpec& init, bool use_feature_norm,
                     SeededRng& rng) {
  if (classes < 2) throw ArgumentError("replace_head: need at least 2 classes");
  const std::size_t head = net.head_index();
  const std::size_t features = net.layers[head].fan_in();
  net.layers.pop_back();
  for (auto& layer : net.layers) layer.tag = ParamTag::pretrained;
  if (use_feature_norm) net.layers.push_back(Layer::feature_norm(features, ParamTag::augmented));
  net.layers.push_back(
      apply_init(Layer::dense(features, classes, ParamTag::augmented), init, rng));
  return net;
}

bool is_known_architecture(std::string_view id) { return id == "mlp" || id == "mlp_deep"; }

Network make_architecture(std::string_view id, std::size_t input_width, std::size_t classes,
                          SeededRng& rng) {
  std::vector<std::size_t> hidden;
  if (id == "mlp") {
    hidden = {256, 128};
  } else if (id == "mlp_deep") {
    hidden = {512, 256, 128};
  } else {
    throw ArgumentError("unknown architecture '" + std::string(id) + "'");
  }
  if (input_width == 0 || classes < 2) throw ArgumentError("make_architecture: bad dimensions");
  const InitSpec he = InitSpec::he_fan_in(2.0);
  Network net;
  net.layers.push_back(Layer::flatten());
  std::size_t width = input_width;
  for (std::size_t h : hidden) {
    net.layers.push_back(apply_init(Layer::dense(width, h), he, rng));
    net.layers.push_back(Layer::relu());
    width = h;
  }
  net.layers.push_back(apply_init(Layer::dense(width, classes), he, rng));
  return net;
}

}  // namespace tlab
