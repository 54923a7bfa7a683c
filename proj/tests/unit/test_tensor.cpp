#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "ntklab/error.hpp"
#include "ntklab/network.hpp"
#include "ntklab/tensor.hpp"
#include "test_support.hpp"

using namespace ntklab;
using ntklab::testing::finite_difference_grad;
using ntklab::testing::max_relative_error;
using ntklab::testing::random_params;
using ntklab::testing::random_tensor;

namespace {

Architecture linear_1d() { return Architecture({1}, {LayerSpec::dense(1, 1, false)}); }

ParamVector with_values(const Architecture& arch, std::vector<double> v) {
  return ParamVector(arch.param_layout(), std::move(v));
}

}  // namespace

TEST(Tensor, ShapeMustMatchData) {
  EXPECT_THROW(Tensor({2, 2}, {1, 2, 3}), ConfigError);
  EXPECT_THROW(Tensor({0, 2}), ConfigError);
  const Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rank(), 2u);
}

TEST(Tensor, RejectsNonFiniteEntries) {
  EXPECT_THROW(Tensor({2}, {1.0, std::numeric_limits<double>::quiet_NaN()}), NumericalError);
  EXPECT_THROW(Tensor({1}, {std::numeric_limits<double>::infinity()}), NumericalError);
}

TEST(Tensor, ReshapeKeepsData) {
  const Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor r = t.reshaped({6});
  EXPECT_EQ(r.shape(), Shape{6});
  EXPECT_EQ(std::vector<double>(r.data().begin(), r.data().end()), (std::vector<double>{1, 2, 3, 4, 5, 6}));
  EXPECT_THROW(t.reshaped({4}), ConfigError);
}

TEST(ParamVector, SegmentsPartitionTheVector) {
  const Architecture arch({3}, {LayerSpec::dense(3, 4), LayerSpec::relu(), LayerSpec::dense(4, 2)});
  const ParamVector p = arch.zero_params();
  std::size_t expected = 0;
  for (const auto& seg : p.segments()) {
    EXPECT_EQ(seg.offset, expected);
    expected += seg.size();
  }
  EXPECT_EQ(expected, p.dim());
  EXPECT_EQ(p.dim(), 3u * 4 + 4 + 4 * 2 + 2);
}

TEST(ParamVector, RejectsOverlappingSegments) {
  std::vector<ParamSegment> segs{{0, ParamRole::weight, {2}, 0}, {0, ParamRole::bias, {2}, 1}};
  EXPECT_THROW(ParamVector{segs}, ConfigError);
}

TEST(ParamVector, LayerViewRoundTripIsLossless) {
  const Architecture arch({2, 4, 4}, {LayerSpec::conv2d(2, 3, 3), LayerSpec::relu(), LayerSpec::flatten(),
                                      LayerSpec::dense(48, 5)});
  const ParamVector p = random_params(arch, 7);
  const ParamVector back = ParamVector::from_layer_views(p.segments(), p.layer_views());
  ASSERT_EQ(back.dim(), p.dim());
  for (std::size_t i = 0; i < p.dim(); ++i) EXPECT_EQ(back.values()[i], p.values()[i]);
}

TEST(Forward, LinearModel) {
  const Architecture arch = linear_1d();
  const ParamVector w = with_values(arch, {2.0});
  const auto r = forward(arch, w, Tensor::vector({3.0}));
  EXPECT_EQ(r.output.data()[0], 6.0);
}

TEST(Forward, IdentityDense) {
  const Architecture arch({2}, {LayerSpec::dense(2, 2, false)});
  const auto r = forward(arch, with_values(arch, {1, 0, 0, 1}), Tensor::vector({1.0, 2.0}));
  EXPECT_EQ(r.output.data()[0], 1.0);
  EXPECT_EQ(r.output.data()[1], 2.0);
}

TEST(Forward, TwoLayerReluByHand) {
  // h = relu(W1 x + b1), y = W2 h + b2
  const Architecture arch({2}, {LayerSpec::dense(2, 3), LayerSpec::relu(), LayerSpec::dense(3, 2)});
  const std::vector<double> v{
      1, 2,  -1, 0.5, 3, 1,   // W1
      0.1, 0, 0.2,            // b1
      1, -1, 2, 0.5, 1, -2,   // W2
      0.3, -0.4};             // b2
  const auto r = forward(arch, with_values(arch, v), Tensor::vector({1.0, -1.0}));
  // W1 x + b1 = (1-2+0.1, -1-0.5+0, 3-1+0.2) = (-0.9, -1.5, 2.2) -> relu (0, 0, 2.2)
  // W2 h + b2 = (4.4+0.3, -4.4-0.4)
  EXPECT_NEAR(r.output.data()[0], 4.7, 1e-15);
  EXPECT_NEAR(r.output.data()[1], -4.8, 1e-15);
}

TEST(Forward, ShapeMismatchIsConfigError) {
  const Architecture arch = linear_1d();
  EXPECT_THROW(forward(arch, with_values(arch, {1.0}), Tensor::vector({1.0, 2.0})), ConfigError);
  const Architecture other({2}, {LayerSpec::dense(2, 1)});
  EXPECT_THROW(forward(arch, other.zero_params(), Tensor::vector({1.0})), ConfigError);
}

TEST(Forward, OverflowIsNumericalErrorNamingTheLayer) {
  const Architecture arch({1}, {LayerSpec::dense(1, 1, false), LayerSpec::square(), LayerSpec::square()});
  try {
    forward(arch, with_values(arch, {1e200}), Tensor::vector({1.0}));
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 1"), std::string::npos) << e.what();
  }
}

TEST(Forward, RecomputationIsBitIdentical) {
  const Architecture arch({1, 8, 8}, {LayerSpec::conv2d(1, 4, 3), LayerSpec::relu(), LayerSpec::max_pool2d(),
                                      LayerSpec::flatten(), LayerSpec::dense(64, 3)});
  const ParamVector p = random_params(arch, 3);
  const Tensor x = random_tensor({1, 8, 8}, 4);
  const auto a = forward(arch, p, x);
  const auto b = forward(arch, p, x);
  EXPECT_EQ(a.output, b.output);
  const ParamVector ga = grad_scalar(a.tape, 1), gb = grad_scalar(b.tape, 1);
  for (std::size_t i = 0; i < ga.dim(); ++i) EXPECT_EQ(ga.values()[i], gb.values()[i]);
}

TEST(GradScalar, LinearModel) {
  const Architecture arch = linear_1d();
  const ParamVector w = with_values(arch, {2.0});
  const auto r = forward(arch, w, Tensor::vector({3.0}));
  EXPECT_EQ(grad_scalar(r.tape, 0).values()[0], 3.0);
}

TEST(GradScalar, LinearTimesSquaredInput) {
  // f(x) = w * x^2 with w = 1, x = 2: df/dw = 4.
  const Architecture arch({1}, {LayerSpec::square(), LayerSpec::dense(1, 1, false)});
  const ParamVector w = with_values(arch, {1.0});
  const auto r = forward(arch, w, Tensor::vector({2.0}));
  EXPECT_EQ(r.output.data()[0], 4.0);
  EXPECT_EQ(grad_scalar(r.tape, 0).values()[0], 4.0);
}

TEST(GradScalar, StaleTapeIsUsageError) {
  const Architecture arch = linear_1d();
  ParamVector w = with_values(arch, {2.0});
  const auto r = forward(arch, w, Tensor::vector({3.0}));
  w.mutable_values()[0] = 5.0;
  EXPECT_FALSE(r.tape.fresh());
  EXPECT_THROW(grad_scalar(r.tape, 0), UsageError);
}

TEST(GradScalar, OutputIndexOutOfRange) {
  const Architecture arch = linear_1d();
  const ParamVector w = with_values(arch, {2.0});
  const auto r = forward(arch, w, Tensor::vector({3.0}));
  EXPECT_THROW(grad_scalar(r.tape, 1), UsageError);
}

struct GradCase {
  const char* name;
  Shape input;
  std::vector<LayerSpec> layers;
};

class FiniteDifference : public ::testing::TestWithParam<GradCase> {};

TEST_P(FiniteDifference, AutodiffMatchesCentralDifferences) {
  const GradCase& c = GetParam();
  const Architecture arch(c.input, c.layers);
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    const ParamVector p = random_params(arch, seed);
    const Tensor x = random_tensor(c.input, seed + 100);
    const auto r = forward(arch, p, x);
    for (std::size_t o = 0; o < arch.num_outputs(); ++o) {
      const ParamVector g = grad_scalar(r.tape, o);
      const auto fd = finite_difference_grad(arch, p, x, o);
      EXPECT_LE(max_relative_error(g.values(), fd), 1e-4) << c.name << " seed " << seed << " output " << o;
    }
  }
}

INSTANTIATE_TEST_SUITE_P(
    LayerTypes, FiniteDifference,
    ::testing::Values(
        GradCase{"dense", {4}, {LayerSpec::dense(4, 3)}},
        GradCase{"dense_relu_dense", {4}, {LayerSpec::dense(4, 5), LayerSpec::relu(), LayerSpec::dense(5, 2)}},
        GradCase{"scaled_dense", {4}, {LayerSpec::dense(4, 5, true, 0.5), LayerSpec::relu(), LayerSpec::dense(5, 2, true, 0.4)}},
        GradCase{"conv", {2, 5, 5}, {LayerSpec::conv2d(2, 3, 3), LayerSpec::flatten(), LayerSpec::dense(75, 2)}},
        GradCase{"conv_relu_pool", {2, 6, 6}, {LayerSpec::conv2d(2, 3, 3), LayerSpec::relu(), LayerSpec::max_pool2d(),
                                              LayerSpec::flatten(), LayerSpec::dense(27, 2)}},
        GradCase{"pool_odd_extent", {1, 5, 5}, {LayerSpec::conv2d(1, 2, 5), LayerSpec::max_pool2d(),
                                               LayerSpec::flatten(), LayerSpec::dense(8, 2)}},
        GradCase{"square", {3}, {LayerSpec::dense(3, 3), LayerSpec::square(), LayerSpec::dense(3, 1)}}),
    [](const ::testing::TestParamInfo<GradCase>& info) { return std::string(info.param.name); });

TEST(GradScalar, LinearityOnSharedTape) {
  const Architecture arch({3}, {LayerSpec::dense(3, 6), LayerSpec::relu(), LayerSpec::dense(6, 3)});
  const ParamVector p = random_params(arch, 11);
  const auto r = forward(arch, p, random_tensor({3}, 12));
  const double a = 0.75, b = -2.5;
  const ParamVector combined = vjp(r.tape, std::vector<double>{a, b, 0.0});
  ParamVector separate = grad_scalar(r.tape, 0);
  separate.scale(a);
  separate.axpy(b, grad_scalar(r.tape, 1));
  for (std::size_t i = 0; i < p.dim(); ++i) {
    EXPECT_NEAR(combined.values()[i], separate.values()[i], 1e-14 * (1.0 + std::abs(separate.values()[i])));
  }
}

TEST(GradLoss, SquaredZeroResidual) {
  const Architecture arch = linear_1d();
  const ParamVector w = with_values(arch, {1.0});
  const auto r = forward(arch, w, Tensor::vector({3.0}));
  const LossGrad lg = grad_loss(r.tape, LossKind::squared, Tensor::vector({3.0}));
  EXPECT_EQ(lg.loss, 0.0);
  EXPECT_EQ(lg.grad.values()[0], 0.0);
}

TEST(GradLoss, SquaredHalfConvention) {
  // f = 6, y = 0: loss = 0.5 * 36 = 18, dL/dw = e * x = 18.
  const Architecture arch = linear_1d();
  const ParamVector w = with_values(arch, {2.0});
  const auto r = forward(arch, w, Tensor::vector({3.0}));
  const LossGrad lg = grad_loss(r.tape, LossKind::squared, Tensor::vector({0.0}));
  EXPECT_EQ(lg.loss, 18.0);
  EXPECT_EQ(lg.grad.values()[0], 18.0);
}

TEST(GradLoss, CrossEntropyUniformLogits) {
  const Architecture arch({5}, {LayerSpec::dense(5, 5, false)});
  const ParamVector zero = arch.zero_params();
  const auto r = forward(arch, zero, Tensor::vector({1, 2, 3, 4, 5}));
  const LossGrad lg = grad_loss(r.tape, LossKind::cross_entropy, class_target(2));
  EXPECT_NEAR(lg.loss, std::log(5.0), 1e-15);
}

TEST(GradLoss, CrossEntropyMatchesFiniteDifferences) {
  const Architecture arch({4}, {LayerSpec::dense(4, 6), LayerSpec::relu(), LayerSpec::dense(6, 3)});
  const ParamVector p = random_params(arch, 5);
  const Tensor x = random_tensor({4}, 6);
  const LossGrad lg = grad_loss(forward(arch, p, x).tape, LossKind::cross_entropy, class_target(1));
  EXPECT_GE(lg.loss, 0.0);
  std::vector<double> fd(p.dim());
  for (std::size_t i = 0; i < p.dim(); ++i) {
    ParamVector a = p, b = p;
    a.mutable_values()[i] += 1e-5;
    b.mutable_values()[i] -= 1e-5;
    const double la = loss_value(LossKind::cross_entropy, forward(arch, a, x).output.data(), class_target(1));
    const double lb = loss_value(LossKind::cross_entropy, forward(arch, b, x).output.data(), class_target(1));
    fd[i] = (la - lb) / 2e-5;
  }
  EXPECT_LE(max_relative_error(lg.grad.values(), fd), 1e-4);
}

TEST(GradLoss, CrossEntropyIsStableForLargeLogits) {
  const Architecture arch({1}, {LayerSpec::dense(1, 2, false)});
  const ParamVector w = with_values(arch, {1000.0, -1000.0});
  const auto r = forward(arch, w, Tensor::vector({1.0}));
  const LossGrad lg = grad_loss(r.tape, LossKind::cross_entropy, class_target(1));
  EXPECT_NEAR(lg.loss, 2000.0, 1e-9);
  EXPECT_TRUE(lg.grad.all_finite());
}

TEST(GradLoss, InvalidClassIsDataError) {
  const Architecture arch({2}, {LayerSpec::dense(2, 3)});
  const ParamVector zero = arch.zero_params();
  const auto r = forward(arch, zero, Tensor::vector({1.0, 1.0}));
  EXPECT_THROW(grad_loss(r.tape, LossKind::cross_entropy, class_target(3)), DataError);
}

TEST(Tape, BackwardVisitsEveryLayer) {
  const Architecture arch({1, 4, 4}, {LayerSpec::conv2d(1, 2, 3), LayerSpec::relu(), LayerSpec::max_pool2d(),
                                      LayerSpec::flatten(), LayerSpec::dense(8, 2)});
  const ParamVector p = random_params(arch, 9);
  const auto r = forward(arch, p, random_tensor({1, 4, 4}, 10));
  EXPECT_EQ(r.tape.num_nodes(), arch.layers().size());
  // Both parameterized layers receive gradient signal.
  const ParamVector g = grad_scalar(r.tape, 0);
  for (std::size_t s = 0; s < g.segments().size(); ++s) {
    double mag = 0.0;
    for (double v : g.segment(s)) mag += std::abs(v);
    EXPECT_GT(mag, 0.0) << "segment " << s;
  }
}

TEST(Network, ReluSubgradientAtZeroIsZero) {
  // f = relu(w * x) at w * x = 0 has df/dw = 0.
  const Architecture arch({1}, {LayerSpec::dense(1, 1, false), LayerSpec::relu()});
  const ParamVector w = with_values(arch, {0.0});
  const auto r = forward(arch, w, Tensor::vector({1.0}));
  EXPECT_EQ(grad_scalar(r.tape, 0).values()[0], 0.0);
}

TEST(Network, MaxPoolTiesGoToFirstMaximum) {
  // Four equal inputs into a 2x2 pool: the gradient flows to the top-left position only.
  const Architecture arch({1, 2, 2}, {LayerSpec::conv2d(1, 1, 1, false), LayerSpec::max_pool2d()});
  const ParamVector w = with_values(arch, {1.0});
  const auto r = forward(arch, w, Tensor({1, 2, 2}, {1, 1, 1, 1}));
  EXPECT_EQ(r.output.data()[0], 1.0);
  EXPECT_EQ(grad_scalar(r.tape, 0).values()[0], 1.0);
}
