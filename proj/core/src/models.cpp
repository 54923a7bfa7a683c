#include "ntklab/models.hpp"

#include <cmath>
#include <random>

#include "ntklab/error.hpp"

namespace ntklab {

std::string to_string(ModelKind kind) { return kind == ModelKind::cnn3 ? "cnn3" : "mlp"; }

std::string to_string(InitScheme scheme) {
  switch (scheme) {
    case InitScheme::kaiming_uniform: return "kaiming_uniform";
    case InitScheme::kaiming_normal: return "kaiming_normal";
    case InitScheme::ntk_like: return "ntk_like";
  }
  return "unknown";
}

std::string to_string(LrScaling scaling) {
  return scaling == LrScaling::none ? "none" : "inverse_width";
}

Architecture build_architecture(const ModelSpec& spec, InitScheme init) {
  if (spec.width == 0) throw ConfigError("model width must be positive");
  if (spec.num_classes == 0) throw ConfigError("model needs at least one output class");
  const bool ntk = init == InitScheme::ntk_like;
  auto scale_for = [ntk](std::size_t fan_in) { return ntk ? 1.0 / std::sqrt(static_cast<double>(fan_in)) : 1.0; };

  std::vector<LayerSpec> layers;
  if (spec.kind == ModelKind::cnn3) {
    const Shape& in = spec.input_shape;
    if (in.size() != 3 || in[1] % 8 != 0 || in[2] % 8 != 0 || in[1] == 0 || in[2] == 0) {
      throw ConfigError("cnn3 needs a (C, H, W) input with H and W divisible by 8, got " + shape_to_string(in));
    }
    std::size_t channels = in[0];
    for (int block = 0; block < 3; ++block) {
      layers.push_back(LayerSpec::conv2d(channels, spec.width, 3, true, scale_for(channels * 9)));
      layers.push_back(LayerSpec::relu());
      layers.push_back(LayerSpec::max_pool2d());
      channels = spec.width;
    }
    layers.push_back(LayerSpec::flatten());
    const std::size_t features = spec.width * (in[1] / 8) * (in[2] / 8);
    layers.push_back(LayerSpec::dense(features, spec.num_classes, true, scale_for(features)));
  } else {
    if (spec.mlp_depth == 0) throw ConfigError("mlp needs at least one hidden layer");
    std::size_t features = shape_size(spec.input_shape);
    if (spec.input_shape.size() != 1) layers.push_back(LayerSpec::flatten());
    for (std::size_t d = 0; d < spec.mlp_depth; ++d) {
      layers.push_back(LayerSpec::dense(features, spec.width, true, scale_for(features)));
      layers.push_back(LayerSpec::relu());
      features = spec.width;
    }
    layers.push_back(LayerSpec::dense(features, spec.num_classes, true, scale_for(features)));
  }
  return Architecture(spec.input_shape, std::move(layers));
}

std::size_t parameter_count(const ModelSpec& spec) {
  return build_architecture(spec, InitScheme::kaiming_normal).param_count();
}

ParamVector initialize(const Architecture& arch, InitScheme init, std::uint64_t seed) {
  ParamVector params = arch.zero_params();
  std::mt19937_64 rng(seed);
  const auto layers = arch.layers();
  for (std::size_t s = 0; s < params.segments().size(); ++s) {
    const ParamSegment& seg = params.segments()[s];
    if (seg.role != ParamRole::weight) continue;
    const double fan_in = static_cast<double>(layers[seg.layer].fan_in());
    auto values = params.mutable_segment(s);
    switch (init) {
      case InitScheme::kaiming_normal: {
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
        for (double& v : values) v = dist(rng);
        break;
      }
      case InitScheme::kaiming_uniform: {
        const double bound = std::sqrt(6.0 / fan_in);
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (double& v : values) v = dist(rng);
        break;
      }
      case InitScheme::ntk_like: {
        std::normal_distribution<double> dist(0.0, 1.0);
        for (double& v : values) v = dist(rng);
        break;
      }
    }
  }
  return params;
}

double effective_learning_rate(const ParamRegime& regime, std::size_t width) {
  if (width == 0) throw ConfigError("width must be positive");
  if (regime.lr_scaling == LrScaling::none) return regime.lr_base;
  return regime.lr_base * static_cast<double>(regime.reference_width) / static_cast<double>(width);
}

}  // namespace ntklab
