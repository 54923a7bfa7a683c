#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "ntklab/network.hpp"

namespace ntklab {

enum class ModelKind { cnn3, mlp };
enum class InitScheme { kaiming_uniform, kaiming_normal, ntk_like };
enum class LrScaling { none, inverse_width };

std::string to_string(ModelKind kind);
std::string to_string(InitScheme scheme);
std::string to_string(LrScaling scaling);

/// Model zoo entry.
///
/// cnn3: three blocks of [3x3 conv(width) -> ReLU -> 2x2 max pool] followed by one dense
/// layer onto `num_classes` logits. Spatial extents must be divisible by 8.
/// mlp: `mlp_depth` hidden dense layers of `width` units with ReLU, then a dense readout.
struct ModelSpec {
  ModelKind kind = ModelKind::cnn3;
  std::size_t width = 32;
  Shape input_shape{3, 8, 8};
  std::size_t num_classes = 10;
  std::size_t mlp_depth = 2;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct ParamRegime {
  InitScheme init = InitScheme::kaiming_uniform;
  double lr_base = 1e-3;
  LrScaling lr_scaling = LrScaling::none;
  /// Width at which the scaled learning rate equals lr_base.
  std::size_t reference_width = 32;

  friend bool operator==(const ParamRegime&, const ParamRegime&) = default;
};

/// Expands a model spec into its layer stack. Under ntk_like the 1/sqrt(fan_in)
/// multiplier is folded into each parametrized layer's weight_scale.
Architecture build_architecture(const ModelSpec& spec, InitScheme init);

std::size_t parameter_count(const ModelSpec& spec);

/// Draws initial weights; biases start at zero under every scheme.
///   kaiming_normal:  W ~ N(0, 2 / fan_in)
///   kaiming_uniform: W ~ U(-sqrt(6 / fan_in), sqrt(6 / fan_in))
///   ntk_like:        W ~ N(0, 1)
ParamVector initialize(const Architecture& arch, InitScheme init, std::uint64_t seed);

/// lr_base, or lr_base * reference_width / width under inverse_width scaling.
double effective_learning_rate(const ParamRegime& regime, std::size_t width);

}  // namespace ntklab
