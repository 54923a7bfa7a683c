#include <gtest/gtest.h>

#include <cmath>

#include "ntklab/error.hpp"
#include "ntklab/models.hpp"
#include "ntklab/network.hpp"

using namespace ntklab;

namespace {

double variance(std::span<const double> v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  return var / static_cast<double>(v.size());
}

// One dense layer with 8 inputs and enough outputs for 10^6 weight draws.
Architecture wide_dense(InitScheme init) {
  const double scale = init == InitScheme::ntk_like ? 1.0 / std::sqrt(8.0) : 1.0;
  return Architecture({8}, {LayerSpec::dense(8, 125000, true, scale)});
}

}  // namespace

TEST(Models, Cnn3Structure) {
  ModelSpec spec;
  spec.width = 16;
  const Architecture arch = build_architecture(spec, InitScheme::kaiming_normal);
  std::size_t conv = 0, pool = 0, dense = 0, relu = 0;
  for (const LayerSpec& l : arch.layers()) {
    conv += l.kind == LayerKind::conv2d;
    pool += l.kind == LayerKind::max_pool2d;
    dense += l.kind == LayerKind::dense;
    relu += l.kind == LayerKind::relu;
  }
  EXPECT_EQ(conv, 3u);
  EXPECT_EQ(pool, 3u);
  EXPECT_EQ(dense, 1u);
  EXPECT_EQ(relu, 3u);
  EXPECT_EQ(arch.num_outputs(), 10u);
}

TEST(Models, ParameterCountIsDeterministic) {
  ModelSpec spec;
  spec.width = 32;
  // conv: 3*32*9+32, 32*32*9+32 (x2), dense: 32*1*1*10+10 on 8x8 inputs
  const std::size_t expected = (3 * 32 * 9 + 32) + 2 * (32 * 32 * 9 + 32) + (32 * 10 + 10);
  EXPECT_EQ(parameter_count(spec), expected);
  EXPECT_EQ(build_architecture(spec, InitScheme::kaiming_uniform).param_count(), expected);
  spec.input_shape = {3, 32, 32};
  EXPECT_EQ(parameter_count(spec), expected - 330 + (32 * 16 * 10 + 10));
}

TEST(Models, MlpWidthAndDepth) {
  ModelSpec spec;
  spec.kind = ModelKind::mlp;
  spec.width = 20;
  spec.mlp_depth = 2;
  spec.input_shape = {3, 8, 8};
  EXPECT_EQ(parameter_count(spec), (192 * 20 + 20) + (20 * 20 + 20) + (20 * 10 + 10));
}

TEST(Models, Cnn3NeedsSpatialExtentDivisibleByEight) {
  ModelSpec spec;
  spec.input_shape = {3, 12, 12};
  EXPECT_THROW(build_architecture(spec, InitScheme::kaiming_normal), ConfigError);
}

TEST(Init, KaimingNormalVariance) {
  const Architecture arch = wide_dense(InitScheme::kaiming_normal);
  const ParamVector p = initialize(arch, InitScheme::kaiming_normal, 0);
  ASSERT_EQ(p.segment(0).size(), 1000000u);
  EXPECT_NEAR(variance(p.segment(0)), 0.25, 0.02 * 0.25);
}

TEST(Init, KaimingUniformBoundAndVariance) {
  const Architecture arch = wide_dense(InitScheme::kaiming_uniform);
  const ParamVector p = initialize(arch, InitScheme::kaiming_uniform, 0);
  const double bound = std::sqrt(6.0 / 8.0);
  for (double w : p.segment(0)) ASSERT_LE(std::abs(w), bound);
  EXPECT_NEAR(variance(p.segment(0)), 0.25, 0.02 * 0.25);
}

TEST(Init, NtkLikeRawWeightsAreStandardNormal) {
  ModelSpec spec;
  spec.kind = ModelKind::mlp;
  spec.input_shape = {8};
  EXPECT_DOUBLE_EQ(build_architecture(spec, InitScheme::ntk_like).layers()[0].weight_scale, 1.0 / std::sqrt(8.0));
  const Architecture arch = wide_dense(InitScheme::ntk_like);
  const ParamVector p = initialize(arch, InitScheme::ntk_like, 0);
  EXPECT_NEAR(variance(p.segment(0)), 1.0, 0.02);
}

TEST(Init, PerLayerVarianceInCnn) {
  ModelSpec spec;
  spec.width = 64;
  const Architecture arch = build_architecture(spec, InitScheme::kaiming_normal);
  const ParamVector p = initialize(arch, InitScheme::kaiming_normal, 3);
  for (std::size_t s = 0; s < p.segments().size(); ++s) {
    const ParamSegment& seg = p.segments()[s];
    if (seg.role != ParamRole::weight || seg.size() < 100000) continue;
    const double fan_in = static_cast<double>(arch.layers()[seg.layer].fan_in());
    EXPECT_NEAR(variance(p.segment(s)), 2.0 / fan_in, 0.02 * 2.0 / fan_in) << "layer " << seg.layer;
  }
}

TEST(Init, BiasesAreZero) {
  ModelSpec spec;
  const Architecture arch = build_architecture(spec, InitScheme::kaiming_uniform);
  const ParamVector p = initialize(arch, InitScheme::kaiming_uniform, 1);
  for (std::size_t s = 0; s < p.segments().size(); ++s) {
    if (p.segments()[s].role != ParamRole::bias) continue;
    for (double b : p.segment(s)) EXPECT_EQ(b, 0.0);
  }
}

TEST(Init, SameSeedSameParameters) {
  ModelSpec spec;
  const Architecture arch = build_architecture(spec, InitScheme::kaiming_normal);
  const ParamVector a = initialize(arch, InitScheme::kaiming_normal, 42);
  const ParamVector b = initialize(arch, InitScheme::kaiming_normal, 42);
  const ParamVector c = initialize(arch, InitScheme::kaiming_normal, 43);
  EXPECT_TRUE(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
  EXPECT_FALSE(std::equal(a.values().begin(), a.values().end(), c.values().begin()));
}

TEST(LearningRate, Scaling) {
  ParamRegime r;
  r.lr_base = 1e-3;
  r.lr_scaling = LrScaling::none;
  EXPECT_EQ(effective_learning_rate(r, 2048), 1e-3);
  r.lr_scaling = LrScaling::inverse_width;
  r.reference_width = 32;
  EXPECT_EQ(effective_learning_rate(r, 32), 1e-3);
  EXPECT_EQ(effective_learning_rate(r, 64), 5e-4);
  EXPECT_THROW(effective_learning_rate(r, 0), ConfigError);
}
