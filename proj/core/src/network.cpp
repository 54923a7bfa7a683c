#include "ntklab/network.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

#include "ntklab/error.hpp"

namespace ntklab {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixMap = Eigen::Map<RowMatrix>;
using ConstRowMatrixMap = Eigen::Map<const RowMatrix>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

std::string layer_name(std::size_t index, LayerKind kind) {
  return "layer " + std::to_string(index) + " (" + to_string(kind) + ")";
}

// Unfolds a (C, H, W) input into a (C*k*k, H*W) patch matrix with zero "same" padding.
void im2col(std::span<const double> input, std::size_t channels, std::size_t height, std::size_t width,
            std::size_t kernel, RowMatrix& cols) {
  const auto pad = static_cast<std::ptrdiff_t>(kernel / 2);
  const auto h = static_cast<std::ptrdiff_t>(height);
  const auto w = static_cast<std::ptrdiff_t>(width);
  cols.resize(static_cast<Eigen::Index>(channels * kernel * kernel), static_cast<Eigen::Index>(height * width));
  Eigen::Index row = 0;
  for (std::size_t c = 0; c < channels; ++c) {
    const double* plane = input.data() + c * height * width;
    for (std::size_t ky = 0; ky < kernel; ++ky) {
      for (std::size_t kx = 0; kx < kernel; ++kx, ++row) {
        double* dst = cols.row(row).data();
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
        for (std::ptrdiff_t y = 0; y < h; ++y) {
          const std::ptrdiff_t sy = y + dy;
          for (std::ptrdiff_t x = 0; x < w; ++x) {
            const std::ptrdiff_t sx = x + dx;
            const bool inside = sy >= 0 && sy < h && sx >= 0 && sx < w;
            dst[y * w + x] = inside ? plane[sy * w + sx] : 0.0;
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters patch gradients back onto the input grid.
void col2im(const RowMatrix& cols, std::size_t channels, std::size_t height, std::size_t width,
            std::size_t kernel, std::span<double> input_grad) {
  const auto pad = static_cast<std::ptrdiff_t>(kernel / 2);
  const auto h = static_cast<std::ptrdiff_t>(height);
  const auto w = static_cast<std::ptrdiff_t>(width);
  std::fill(input_grad.begin(), input_grad.end(), 0.0);
  Eigen::Index row = 0;
  for (std::size_t c = 0; c < channels; ++c) {
    double* plane = input_grad.data() + c * height * width;
    for (std::size_t ky = 0; ky < kernel; ++ky) {
      for (std::size_t kx = 0; kx < kernel; ++kx, ++row) {
        const double* src = cols.row(row).data();
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
        for (std::ptrdiff_t y = 0; y < h; ++y) {
          const std::ptrdiff_t sy = y + dy;
          if (sy < 0 || sy >= h) continue;
          for (std::ptrdiff_t x = 0; x < w; ++x) {
            const std::ptrdiff_t sx = x + dx;
            if (sx < 0 || sx >= w) continue;
            plane[sy * w + sx] += src[y * w + x];
          }
        }
      }
    }
  }
}

}  // namespace

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::max_pool2d: return "max_pool2d";
    case LayerKind::relu: return "relu";
    case LayerKind::flatten: return "flatten";
    case LayerKind::square: return "square";
  }
  return "unknown";
}

std::string to_string(LossKind kind) {
  return kind == LossKind::squared ? "squared" : "cross_entropy";
}

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out, bool bias, double weight_scale) {
  return {LayerKind::dense, in, out, 0, bias, weight_scale};
}

LayerSpec LayerSpec::conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                            bool bias, double weight_scale) {
  return {LayerKind::conv2d, in_channels, out_channels, kernel, bias, weight_scale};
}

std::size_t LayerSpec::fan_in() const {
  switch (kind) {
    case LayerKind::dense: return in;
    case LayerKind::conv2d: return in * kernel * kernel;
    default: return 0;
  }
}

Architecture::Architecture(Shape input_shape, std::vector<LayerSpec> layers) : layers_(std::move(layers)) {
  if (input_shape.empty() || shape_size(input_shape) == 0) {
    throw ConfigError("architecture input shape must be non-empty");
  }
  shapes_.push_back(std::move(input_shape));
  std::size_t offset = 0;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const LayerSpec& layer = layers_[k];
    const Shape& in = shapes_.back();
    Shape out;
    const std::string where = layer_name(k, layer.kind);
    switch (layer.kind) {
      case LayerKind::dense:
        if (in.size() != 1 || in[0] != layer.in || layer.out == 0) {
          throw ConfigError(where + ": expects input (" + std::to_string(layer.in) + "), got " +
                            shape_to_string(in));
        }
        out = {layer.out};
        break;
      case LayerKind::conv2d:
        if (in.size() != 3 || in[0] != layer.in || layer.out == 0) {
          throw ConfigError(where + ": expects " + std::to_string(layer.in) + " input channels, got " +
                            shape_to_string(in));
        }
        if (layer.kernel == 0 || layer.kernel % 2 == 0) {
          throw ConfigError(where + ": kernel size must be odd for same padding");
        }
        out = {layer.out, in[1], in[2]};
        break;
      case LayerKind::max_pool2d:
        if (in.size() != 3 || in[1] < 2 || in[2] < 2) {
          throw ConfigError(where + ": needs a (C, H, W) input with H, W >= 2, got " + shape_to_string(in));
        }
        out = {in[0], in[1] / 2, in[2] / 2};
        break;
      case LayerKind::relu:
      case LayerKind::square:
        out = in;
        break;
      case LayerKind::flatten:
        out = {shape_size(in)};
        break;
    }
    if (layer.has_params()) {
      if (!(layer.weight_scale > 0.0) || !std::isfinite(layer.weight_scale)) {
        throw ConfigError(where + ": weight scale must be positive");
      }
      Shape wshape = layer.kind == LayerKind::dense ? Shape{layer.out, layer.in}
                                                    : Shape{layer.out, layer.in, layer.kernel, layer.kernel};
      weight_segment_.push_back(layout_.size());
      layout_.push_back({k, ParamRole::weight, wshape, offset});
      offset += shape_size(wshape);
      if (layer.bias) {
        layout_.push_back({k, ParamRole::bias, Shape{layer.out}, offset});
        offset += layer.out;
      }
    } else {
      weight_segment_.push_back(npos);
    }
    shapes_.push_back(std::move(out));
  }
}

std::size_t Architecture::param_count() const {
  std::size_t total = 0;
  for (const auto& seg : layout_) total += seg.size();
  return total;
}

Tape::Tape(const Architecture& arch, const ParamVector& params)
    : arch_(&arch), params_(&params), token_(params.token()) {}

struct TapeAccess {
  static ForwardResult run_forward(const Architecture& arch, const ParamVector& params, const Tensor& x);
  static void backward(const Tape& tape, std::span<const double> cotangent, double scale, ParamVector& grad);
};

ForwardResult TapeAccess::run_forward(const Architecture& arch, const ParamVector& params, const Tensor& x) {
  if (x.shape() != arch.input_shape()) {
    throw ConfigError("input shape " + shape_to_string(x.shape()) + " does not match model input " +
                      shape_to_string(arch.input_shape()));
  }
  if (params.segments() != arch.layout_) {
    throw ConfigError("parameter vector of dimension " + std::to_string(params.dim()) +
                      " does not match model with " + std::to_string(arch.param_count()) + " parameters");
  }
  Tape tape(arch, params);
  const std::size_t n_layers = arch.layers_.size();
  tape.activations_.reserve(n_layers + 1);
  tape.pool_switches_.resize(n_layers);
  tape.activations_.push_back(x);

  RowMatrix cols;
  for (std::size_t k = 0; k < n_layers; ++k) {
    const LayerSpec& layer = arch.layers_[k];
    const Shape& in_shape = arch.shapes_[k];
    const Shape& out_shape = arch.shapes_[k + 1];
    const std::span<const double> in = tape.activations_[k].data();
    Tensor result(out_shape);
    const std::span<double> out = result.data();

    switch (layer.kind) {
      case LayerKind::dense: {
        const std::size_t ws = arch.weight_segment_[k];
        ConstRowMatrixMap weight(params.segment(ws).data(), static_cast<Eigen::Index>(layer.out),
                                 static_cast<Eigen::Index>(layer.in));
        ConstVectorMap xin(in.data(), static_cast<Eigen::Index>(layer.in));
        VectorMap y(out.data(), static_cast<Eigen::Index>(layer.out));
        y.noalias() = layer.weight_scale * (weight * xin);
        if (layer.bias) y += ConstVectorMap(params.segment(ws + 1).data(), static_cast<Eigen::Index>(layer.out));
        break;
      }
      case LayerKind::conv2d: {
        const std::size_t ws = arch.weight_segment_[k];
        const std::size_t hw = in_shape[1] * in_shape[2];
        im2col(in, in_shape[0], in_shape[1], in_shape[2], layer.kernel, cols);
        ConstRowMatrixMap weight(params.segment(ws).data(), static_cast<Eigen::Index>(layer.out), cols.rows());
        RowMatrixMap y(out.data(), static_cast<Eigen::Index>(layer.out), static_cast<Eigen::Index>(hw));
        y.noalias() = layer.weight_scale * (weight * cols);
        if (layer.bias) {
          auto bias = params.segment(ws + 1);
          for (std::size_t c = 0; c < layer.out; ++c) y.row(static_cast<Eigen::Index>(c)).array() += bias[c];
        }
        break;
      }
      case LayerKind::max_pool2d: {
        const std::size_t channels = in_shape[0], h = in_shape[1], w = in_shape[2];
        const std::size_t oh = out_shape[1], ow = out_shape[2];
        auto& switches = tape.pool_switches_[k];
        switches.resize(out.size());
        for (std::size_t c = 0; c < channels; ++c) {
          for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
              std::size_t best = c * h * w + (2 * oy) * w + 2 * ox;
              for (std::size_t dy = 0; dy < 2; ++dy) {
                for (std::size_t dx = 0; dx < 2; ++dx) {
                  const std::size_t idx = c * h * w + (2 * oy + dy) * w + (2 * ox + dx);
                  if (in[idx] > in[best]) best = idx;
                }
              }
              const std::size_t o = (c * oh + oy) * ow + ox;
              out[o] = in[best];
              switches[o] = static_cast<std::uint32_t>(best);
            }
          }
        }
        break;
      }
      case LayerKind::relu:
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
        break;
      case LayerKind::square:
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] * in[i];
        break;
      case LayerKind::flatten:
        std::copy(in.begin(), in.end(), out.begin());
        break;
    }

    for (double v : out) {
      if (!std::isfinite(v)) throw NumericalError("non-finite activation in " + layer_name(k, layer.kind));
    }
    tape.activations_.push_back(std::move(result));
  }
  Tensor output = tape.activations_.back();
  return ForwardResult{std::move(output), std::move(tape)};
}

void TapeAccess::backward(const Tape& tape, std::span<const double> cotangent, double scale,
                          ParamVector& grad) {
  if (!tape.fresh()) {
    throw UsageError("stale tape: parameters were modified after the forward pass");
  }
  const Architecture& arch = *tape.arch_;
  if (cotangent.size() != arch.num_outputs()) {
    throw UsageError("cotangent has " + std::to_string(cotangent.size()) + " entries, network has " +
                     std::to_string(arch.num_outputs()) + " outputs");
  }
  if (grad.segments() != arch.layout_) {
    throw UsageError("gradient accumulator does not match the model parameter layout");
  }
  const ParamVector& params = *tape.params_;
  std::span<double> gdata = grad.mutable_values();

  AlignedBuffer signal(cotangent.begin(), cotangent.end());
  for (double& v : signal) v *= scale;
  AlignedBuffer previous;
  RowMatrix cols, dcols;

  for (std::size_t k = arch.layers_.size(); k-- > 0;) {
    const LayerSpec& layer = arch.layers_[k];
    const Shape& in_shape = arch.shapes_[k];
    const std::span<const double> in = tape.activations_[k].data();
    const bool need_input_grad = k > 0;
    previous.assign(need_input_grad ? in.size() : 0, 0.0);

    switch (layer.kind) {
      case LayerKind::dense: {
        const std::size_t ws = arch.weight_segment_[k];
        const auto rows = static_cast<Eigen::Index>(layer.out);
        const auto cols_n = static_cast<Eigen::Index>(layer.in);
        ConstVectorMap gy(signal.data(), rows);
        ConstVectorMap xin(in.data(), cols_n);
        RowMatrixMap gw(gdata.data() + arch.layout_[ws].offset, rows, cols_n);
        gw.noalias() += layer.weight_scale * (gy * xin.transpose());
        if (layer.bias) VectorMap(gdata.data() + arch.layout_[ws + 1].offset, rows) += gy;
        if (need_input_grad) {
          ConstRowMatrixMap weight(params.segment(ws).data(), rows, cols_n);
          VectorMap(previous.data(), cols_n).noalias() = layer.weight_scale * (weight.transpose() * gy);
        }
        break;
      }
      case LayerKind::conv2d: {
        const std::size_t ws = arch.weight_segment_[k];
        const std::size_t hw = in_shape[1] * in_shape[2];
        im2col(in, in_shape[0], in_shape[1], in_shape[2], layer.kernel, cols);
        const auto rows = static_cast<Eigen::Index>(layer.out);
        ConstRowMatrixMap gy(signal.data(), rows, static_cast<Eigen::Index>(hw));
        RowMatrixMap gw(gdata.data() + arch.layout_[ws].offset, rows, cols.rows());
        gw.noalias() += layer.weight_scale * (gy * cols.transpose());
        if (layer.bias) {
          VectorMap(gdata.data() + arch.layout_[ws + 1].offset, rows) += gy.rowwise().sum();
        }
        if (need_input_grad) {
          ConstRowMatrixMap weight(params.segment(ws).data(), rows, cols.rows());
          dcols.noalias() = layer.weight_scale * (weight.transpose() * gy);
          col2im(dcols, in_shape[0], in_shape[1], in_shape[2], layer.kernel, previous);
        }
        break;
      }
      case LayerKind::max_pool2d:
        if (need_input_grad) {
          const auto& switches = tape.pool_switches_[k];
          for (std::size_t o = 0; o < switches.size(); ++o) previous[switches[o]] += signal[o];
        }
        break;
      case LayerKind::relu:
        if (need_input_grad) {
          for (std::size_t i = 0; i < in.size(); ++i) previous[i] = in[i] > 0.0 ? signal[i] : 0.0;
        }
        break;
      case LayerKind::square:
        if (need_input_grad) {
          for (std::size_t i = 0; i < in.size(); ++i) previous[i] = 2.0 * in[i] * signal[i];
        }
        break;
      case LayerKind::flatten:
        if (need_input_grad) std::copy(signal.begin(), signal.end(), previous.begin());
        break;
    }
    signal.swap(previous);
  }
}

ForwardResult forward(const Architecture& arch, const ParamVector& params, const Tensor& x) {
  return TapeAccess::run_forward(arch, params, x);
}

void accumulate_vjp(const Tape& tape, std::span<const double> cotangent, double scale, ParamVector& grad) {
  TapeAccess::backward(tape, cotangent, scale, grad);
}

ParamVector vjp(const Tape& tape, std::span<const double> cotangent) {
  ParamVector grad = tape.architecture().zero_params();
  TapeAccess::backward(tape, cotangent, 1.0, grad);
  return grad;
}

ParamVector grad_scalar(const Tape& tape, std::size_t output_index) {
  const std::size_t n = tape.architecture().num_outputs();
  if (output_index >= n) {
    throw UsageError("output index " + std::to_string(output_index) + " out of range for " +
                     std::to_string(n) + " outputs");
  }
  std::vector<double> cotangent(n, 0.0);
  cotangent[output_index] = 1.0;
  return vjp(tape, cotangent);
}

namespace {

std::size_t checked_class(std::span<const double> output, const Tensor& target) {
  if (target.size() != 1) throw DataError("cross-entropy target must hold exactly one class index");
  const double raw = target[0];
  if (raw < 0.0 || raw != std::floor(raw) || raw >= static_cast<double>(output.size())) {
    throw DataError("invalid class index " + std::to_string(raw) + " for " + std::to_string(output.size()) +
                    " classes");
  }
  return static_cast<std::size_t>(raw);
}

}  // namespace

double loss_value(LossKind kind, std::span<const double> output, const Tensor& target) {
  if (kind == LossKind::squared) {
    if (target.size() != output.size()) throw DataError("squared-loss target length does not match output");
    double acc = 0.0;
    for (std::size_t i = 0; i < output.size(); ++i) {
      const double e = output[i] - target[i];
      acc += e * e;
    }
    return 0.5 * acc;
  }
  const std::size_t cls = checked_class(output, target);
  const double peak = *std::max_element(output.begin(), output.end());
  double sum = 0.0;
  for (double v : output) sum += std::exp(v - peak);
  return peak + std::log(sum) - output[cls];
}

std::vector<double> loss_output_gradient(LossKind kind, std::span<const double> output, const Tensor& target) {
  std::vector<double> g(output.size());
  if (kind == LossKind::squared) {
    if (target.size() != output.size()) throw DataError("squared-loss target length does not match output");
    for (std::size_t i = 0; i < output.size(); ++i) g[i] = output[i] - target[i];
    return g;
  }
  const std::size_t cls = checked_class(output, target);
  const double peak = *std::max_element(output.begin(), output.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < output.size(); ++i) {
    g[i] = std::exp(output[i] - peak);
    sum += g[i];
  }
  for (double& v : g) v /= sum;
  g[cls] -= 1.0;
  return g;
}

LossGrad grad_loss(const Tape& tape, LossKind kind, const Tensor& target) {
  const auto out = tape.output().data();
  LossGrad result;
  result.loss = loss_value(kind, out, target);
  result.grad = vjp(tape, loss_output_gradient(kind, out, target));
  return result;
}

Tensor class_target(std::size_t class_index) { return Tensor::scalar(static_cast<double>(class_index)); }

}  // namespace ntklab
