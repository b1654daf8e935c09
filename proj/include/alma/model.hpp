#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "alma/tensor.hpp"

namespace alma {

/// y = W x + b with W stored row-major as (out_features, in_features).
struct Dense {
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  std::vector<double> weights;
  std::vector<double> bias;
};

/// Direct convolution over (C, H, W) inputs, zero padding.
/// Weights are laid out as (out_channels, in_channels, kernel_h, kernel_w).
struct Conv2d {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::vector<double> weights;
  std::vector<double> bias;
};

struct ReLU {};

/// Ties resolve to the first maximum in row-major window order.
struct MaxPool2d {
  std::size_t kernel = 2;
  std::size_t stride = 2;
};

struct Flatten {};

using Layer = std::variant<Dense, Conv2d, ReLU, MaxPool2d, Flatten>;

std::string layer_name(const Layer& layer);

/// Number of model propagations spent by an attack.
struct PropagationCounter {
  std::uint64_t forwards = 0;
  std::uint64_t backwards = 0;

  friend bool operator==(const PropagationCounter&, const PropagationCounter&) = default;
};

/// Feedforward classifier. Immutable once constructed except through
/// parameters() (used by the reference-model trainer).
class Model {
 public:
  /// Validates the shape chain; the final output must be a vector with K >= 3 entries.
  Model(Shape input_shape, std::vector<Layer> layers);

  const Shape& input_shape() const { return input_shape_; }
  std::size_t num_classes() const { return num_classes_; }
  const std::vector<Layer>& layers() const { return layers_; }
  /// Output shape of layer i (input shape of layer i + 1).
  const Shape& output_shape(std::size_t i) const { return shapes_[i + 1]; }
  const Shape& input_shape_of(std::size_t i) const { return shapes_[i]; }
  std::size_t parameter_count() const;

  /// Mutable views on (weights, bias) of every parametrized layer, in layer order.
  std::vector<std::vector<double>*> parameters();

  friend bool operator==(const Model& a, const Model& b);

 private:
  Shape input_shape_;
  std::vector<Layer> layers_;
  std::vector<Shape> shapes_;
  std::size_t num_classes_ = 0;
};

/// z = f(x). Counts one forward.
Tensor forward(const Model& model, const Tensor& x, PropagationCounter& counter);

/// J^T upstream where J = dz/dx. Runs its own forward pass: counts one forward and one backward.
Tensor input_gradient(const Model& model, const Tensor& x, const Tensor& upstream, PropagationCounter& counter);

struct ForwardBackward {
  Tensor logits;
  Tensor input_grad;
};

/// One fused propagation: logits are computed, `upstream_of(logits)` picks the
/// cotangent, then J^T cotangent is returned. Counts one forward and one backward.
ForwardBackward forward_backward(const Model& model, const Tensor& x,
                                 const std::function<Tensor(const Tensor&)>& upstream_of,
                                 PropagationCounter& counter);

// Uncounted building blocks, shared by the counted API and the trainer.

/// Inputs to every layer plus the final output.
struct ActivationTrace {
  std::vector<Tensor> activations;  // activations[i] is the input of layer i
  const Tensor& output() const { return activations.back(); }
};

ActivationTrace trace_forward(const Model& model, const Tensor& x);

/// Per parametrized layer: gradient of weights then bias, same order as Model::parameters().
using ParameterGradients = std::vector<std::vector<double>>;

/// Backpropagates `upstream` through the trace. Accumulates into `param_grads`
/// when non-null (must be sized like Model::parameters()).
Tensor backpropagate(const Model& model, const ActivationTrace& trace, const Tensor& upstream,
                     ParameterGradients* param_grads = nullptr);

ParameterGradients zero_parameter_gradients(Model& model);

/// Binary container: "ALMANN1\n", text header, then length-prefixed little-endian f64 blocks.
Model load_model(const std::filesystem::path& path);
Model parse_model(const std::string& bytes);
void save_model(const Model& model, const std::filesystem::path& path);
std::string serialize_model(const Model& model);

}  // namespace alma
