#pragma once

// Sequential networks, the forward tape and reverse-mode differentiation.
//
// Layer conventions:
//   dense      y = s * W x + b           W is (out, in), row-major
//   conv2d     cross-correlation, stride 1, zero "same" padding, odd square kernel,
//              W is (out_channels, in_channels, k, k)
//   max_pool2d 2x2 window, stride 2, floor on odd extents; ties go to the first maximum
//   relu       y = max(x, 0); the subgradient at 0 is 0
//   flatten    reshape to rank 1
//   square     y = x * x elementwise
// `s` is the layer's weight_scale (1 except under the NTK-like parametrization).

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ntklab/params.hpp"
#include "ntklab/tensor.hpp"

namespace ntklab {

enum class LayerKind { dense, conv2d, max_pool2d, relu, flatten, square };

std::string to_string(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::size_t in = 0;   // dense: input features, conv2d: input channels
  std::size_t out = 0;  // dense: output features, conv2d: output channels
  std::size_t kernel = 0;
  bool bias = true;
  double weight_scale = 1.0;

  static LayerSpec dense(std::size_t in, std::size_t out, bool bias = true, double weight_scale = 1.0);
  static LayerSpec conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                          bool bias = true, double weight_scale = 1.0);
  static LayerSpec max_pool2d() { return {LayerKind::max_pool2d}; }
  static LayerSpec relu() { return {LayerKind::relu}; }
  static LayerSpec flatten() { return {LayerKind::flatten}; }
  static LayerSpec square() { return {LayerKind::square}; }

  bool has_params() const { return kind == LayerKind::dense || kind == LayerKind::conv2d; }
  /// Inputs feeding one output unit; 0 for parameterless layers.
  std::size_t fan_in() const;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// A validated stack of layers with known activation shapes and parameter layout.
class Architecture {
 public:
  Architecture(Shape input_shape, std::vector<LayerSpec> layers);

  const Shape& input_shape() const { return shapes_.front(); }
  const Shape& output_shape() const { return shapes_.back(); }
  std::size_t num_outputs() const { return shape_size(output_shape()); }
  std::span<const LayerSpec> layers() const { return layers_; }
  /// shapes()[0] is the input, shapes()[k + 1] the output of layer k.
  std::span<const Shape> shapes() const { return shapes_; }

  const std::vector<ParamSegment>& param_layout() const { return layout_; }
  std::size_t param_count() const;
  ParamVector zero_params() const { return ParamVector(layout_); }

  friend bool operator==(const Architecture& a, const Architecture& b) {
    return a.layers_ == b.layers_ && a.shapes_ == b.shapes_;
  }

 private:
  std::vector<LayerSpec> layers_;
  std::vector<Shape> shapes_;
  std::vector<ParamSegment> layout_;
  // Per layer: index of its weight segment in layout_, or npos.
  std::vector<std::size_t> weight_segment_;
  friend struct TapeAccess;
};

/// Record of one forward pass: saved activations and pooling switches for every layer.
///
/// A tape refers to the architecture and parameters it was recorded with; both must outlive
/// it, and backward passes fail with UsageError if the parameters were mutated in between.
class Tape {
 public:
  std::size_t num_nodes() const { return arch_->layers().size(); }
  const Tensor& output() const { return activations_.back(); }
  const Tensor& input() const { return activations_.front(); }
  const Architecture& architecture() const { return *arch_; }
  const ParamVector& params() const { return *params_; }

  /// True while the parameters are unchanged since the forward pass.
  bool fresh() const { return params_->token() == token_; }

 private:
  Tape(const Architecture& arch, const ParamVector& params);

  const Architecture* arch_;
  const ParamVector* params_;
  std::uint64_t token_;
  std::vector<Tensor> activations_;
  std::vector<std::vector<std::uint32_t>> pool_switches_;

  friend struct TapeAccess;
};

struct ForwardResult {
  Tensor output;
  Tape tape;
};

/// Evaluates the network on one sample, recording a tape for the backward pass.
/// Throws ConfigError on shape mismatch and NumericalError naming the first layer that
/// produced a non-finite activation.
ForwardResult forward(const Architecture& arch, const ParamVector& params, const Tensor& x);

/// Vector-Jacobian product: accumulates scale * d(cotangent . f)/d(theta) into `grad`.
void accumulate_vjp(const Tape& tape, std::span<const double> cotangent, double scale,
                    ParamVector& grad);

/// d(cotangent . f)/d(theta) as a fresh vector.
ParamVector vjp(const Tape& tape, std::span<const double> cotangent);

/// Gradient of a single network output with respect to all parameters.
ParamVector grad_scalar(const Tape& tape, std::size_t output_index);

enum class LossKind { squared, cross_entropy };

std::string to_string(LossKind kind);

/// Squared loss is 0.5 * ||f - y||^2; cross-entropy is -log softmax(f)[class].
double loss_value(LossKind kind, std::span<const double> output, const Tensor& target);
/// d loss / d f.
std::vector<double> loss_output_gradient(LossKind kind, std::span<const double> output,
                                         const Tensor& target);

struct LossGrad {
  double loss = 0.0;
  ParamVector grad;
};

/// Per-sample loss and its parameter gradient. For cross-entropy `target` holds the class
/// index as its only entry; for squared loss it has the output's length.
LossGrad grad_loss(const Tape& tape, LossKind kind, const Tensor& target);

/// Target tensor for a class index.
Tensor class_target(std::size_t class_index);

}  // namespace ntklab
