#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "tlab/tensor.hpp"

namespace tlab {

class SeededRng;
struct InitSpec;

enum class LayerKind { dense, relu, feature_norm, flatten };
enum class ParamTag { pretrained, augmented };
enum class Mode { train, eval };
enum class NormMode { batch_stats, running_stats };

inline constexpr double kFeatureNormEpsilon = 1e-8;
inline constexpr double kFeatureNormMomentum = 0.9;

// Running statistics of a feature_norm layer. `scale` is the global output
// gain 1/sqrt(N) fixed by the most recent training batch, so that the batch
// expectation of the per-example energy of the output equals K/N.
struct FeatureNormState {
  Tensor running_mean;  // 1 x K
  Tensor running_var;   // 1 x K
  double scale = 1.0;
  bool initialized = false;

  friend bool operator==(const FeatureNormState&, const FeatureNormState&) = default;
};

// Values retained by a batch-statistics pass for the backward pass.
struct FeatureNormCache {
  Tensor standardized;          // (x - mean) / sqrt(var + eps), before scaling
  std::vector<double> inv_std;  // per feature
  double scale = 1.0;
};

struct Layer {
  LayerKind kind = LayerKind::relu;
  ParamTag tag = ParamTag::pretrained;
  Tensor weight;  // dense: V_out x V_in
  Tensor bias;    // dense: 1 x V_out
  FeatureNormState norm;
  std::size_t width = 0;  // feature_norm: feature count

  static Layer dense(std::size_t in, std::size_t out, ParamTag tag = ParamTag::pretrained);
  static Layer relu(ParamTag tag = ParamTag::pretrained);
  static Layer feature_norm(std::size_t features, ParamTag tag = ParamTag::pretrained);
  static Layer flatten(ParamTag tag = ParamTag::pretrained);

  bool is_dense() const noexcept { return kind == LayerKind::dense; }
  std::size_t fan_in() const { return weight.shape().at(1); }
  std::size_t fan_out() const { return weight.shape().at(0); }

  friend bool operator==(const Layer&, const Layer&) = default;
};

const char* layer_kind_name(LayerKind kind);

// Sequential stack whose last layer is the dense classification head.
struct Network {
  std::vector<Layer> layers;

  std::size_t head_index() const;
  const Layer& head() const { return layers.at(head_index()); }
  Layer& head() { return layers.at(head_index()); }
  std::size_t classes() const { return head().fan_out(); }

  friend bool operator==(const Network&, const Network&) = default;
};
using LayerStack = Network;

struct ForwardTrace {
  Mode mode = Mode::train;
  std::size_t batch = 0;
  std::vector<Tensor> inputs;   // X^l for every layer
  std::vector<Tensor> outputs;  // A^l for every layer
  std::vector<FeatureNormCache> norm_cache;  // populated for feature_norm layers in train mode
  Tensor logits;
  Tensor probs;

  // Input of the last (head) layer.
  const Tensor& head_input() const { return inputs.back(); }
};

struct BackwardTrace {
  std::size_t head = 0;
  std::vector<Tensor> output_grads;  // delta^l: dL/dA^l
  std::vector<Tensor> input_grads;   // dL/dX^l; empty for layer 0
  std::vector<Tensor> weight_grads;  // dense layers only
  std::vector<Tensor> bias_grads;

  const Tensor& delta_last() const { return output_grads.at(head); }
  // Error delivered to the layer below the head (dL/dX^L); empty for a head-only stack.
  const Tensor& delta_prev() const { return input_grads.at(head); }
};

// Row-wise softmax with max subtraction.
Tensor softmax(const Tensor& logits);

// Mean over the batch of -ln p[true class]. Labels must be strictly one-hot.
double ce_loss(const Tensor& probs, const Tensor& labels);
// Same loss evaluated from logits via log-sum-exp; finite even when a
// probability underflows.
double ce_loss_from_logits(const Tensor& logits, const Tensor& labels);

// Throws ArgumentError unless every row has a single 1 and zeros elsewhere.
void require_one_hot(const Tensor& labels);
Tensor one_hot(const std::vector<int>& labels, std::size_t classes);
std::vector<int> argmax_rows(const Tensor& t);
double accuracy(const Tensor& probs_or_logits, const Tensor& labels);

// Standardizes each feature and scales the result. In batch_stats mode the
// running statistics are refreshed (momentum 0.9; the first batch seeds them).
Tensor feature_norm_forward(const Tensor& x, FeatureNormState& state, NormMode mode,
                            FeatureNormCache* cache = nullptr);
Tensor feature_norm_backward(const Tensor& grad_out, const FeatureNormCache& cache);

// In train mode, feature_norm layers use and update batch statistics.
ForwardTrace forward(Network& net, const Tensor& x, Mode mode);
BackwardTrace backward(const Network& net, const ForwardTrace& trace, const Tensor& labels);

// Swaps the final dense layer for a freshly initialized `classes`-way head,
// optionally preceded by a feature_norm layer. Every surviving layer becomes
// pretrained; the new layers are augmented.
Network replace_head(Network net, std::size_t classes, const InitSpec& init, bool use_feature_norm,
                     SeededRng& rng);

// "mlp": D-256-128-C. "mlp_deep": D-512-256-128-C. Hidden layers use ReLU and
// He fan-in initialization.
Network make_architecture(std::string_view id, std::size_t input_width, std::size_t classes,
                          SeededRng& rng);
bool is_known_architecture(std::string_view id);

}  // namespace tlab
