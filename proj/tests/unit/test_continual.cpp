#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "ntklab/continual.hpp"
#include "ntklab/dataset.hpp"
#include "ntklab/error.hpp"

using namespace ntklab;

namespace {

double weight_sum(const TaskDistribution& d) {
  double s = 0.0;
  for (const auto& [c, w] : d.weights()) s += w;
  return s;
}

Dataset small_data(std::size_t classes, std::size_t per_class) {
  SyntheticSpec spec;
  spec.classes = classes;
  spec.per_class = per_class;
  spec.image_shape = {1, 2, 2};
  return synthetic_dataset(spec);
}

std::vector<std::size_t> range(std::size_t a, std::size_t b) {
  std::vector<std::size_t> v(b - a);
  std::iota(v.begin(), v.end(), a);
  return v;
}

}  // namespace

TEST(TaskDistribution, Validation) {
  EXPECT_THROW(TaskDistribution({}), ConfigError);
  EXPECT_THROW(TaskDistribution({{0, 0.5}, {1, 0.4}}), ConfigError);
  EXPECT_THROW(TaskDistribution({{0, 1.5}, {1, -0.5}}), ConfigError);
  EXPECT_THROW(TaskDistribution({{0, 0.0}}), ConfigError);
  EXPECT_NO_THROW(TaskDistribution({{0, 0.25}, {3, 0.75}}));
}

TEST(WindowFamily, Examples) {
  const auto d0 = window_family(0, 10, 20);
  EXPECT_EQ(d0.support(), range(0, 10));
  for (std::size_t c = 0; c < 10; ++c) EXPECT_DOUBLE_EQ(d0.weight(c), 0.1);
  const auto d10 = window_family(10, 10, 20);
  EXPECT_EQ(d10.support(), range(10, 20));
  EXPECT_EQ(jaccard_similarity(d0, d10), 0.0);
  const auto point = window_family(0, 1, 20);
  EXPECT_EQ(point.support(), std::vector<std::size_t>{0});
  EXPECT_EQ(point.weight(0), 1.0);
}

TEST(WindowFamily, OutOfRangeIsConfigError) {
  EXPECT_THROW(window_family(15, 10, 20), ConfigError);
  EXPECT_THROW(window_family(0, 0, 20), ConfigError);
}

TEST(WindowFamily, AdjacentWindowsAreDisjointForAllWidths) {
  for (std::size_t w = 1; w <= 12; ++w) {
    EXPECT_EQ(jaccard_similarity(window_family(0, w, 2 * w), window_family(w, w, 2 * w)), 0.0) << w;
  }
}

TEST(MixtureFamily, Examples) {
  const auto a0 = mixture_family(0.0);
  EXPECT_EQ(a0.support(), range(0, 5));
  for (std::size_t c = 0; c < 5; ++c) EXPECT_DOUBLE_EQ(a0.weight(c), 0.2);
  const auto half = mixture_family(0.5);
  EXPECT_EQ(half.support(), range(0, 10));
  for (std::size_t c = 0; c < 10; ++c) EXPECT_DOUBLE_EQ(half.weight(c), 0.1);
  const auto a1 = mixture_family(0.1);
  for (std::size_t c = 0; c < 5; ++c) EXPECT_NEAR(a1.weight(c), 0.18, 1e-15);
  for (std::size_t c = 5; c < 10; ++c) EXPECT_NEAR(a1.weight(c), 0.02, 1e-15);
  EXPECT_THROW(mixture_family(-0.1), ConfigError);
  EXPECT_THROW(mixture_family(1.1), ConfigError);
}

TEST(Families, EmitNormalizedDistributions) {
  for (int k = 0; k <= 100; ++k) EXPECT_NEAR(weight_sum(mixture_family(k / 100.0)), 1.0, 1e-12);
  for (std::size_t w = 1; w <= 13; ++w)
    for (std::size_t i = 0; i + w <= 13; ++i) EXPECT_NEAR(weight_sum(window_family(i, w, 13)), 1.0, 1e-12);
}

TEST(Similarity, Jaccard) {
  const auto d0 = window_family(0, 10, 20);
  EXPECT_EQ(jaccard_similarity(d0, d0), 1.0);
  EXPECT_DOUBLE_EQ(jaccard_similarity(d0, window_family(5, 10, 20)), 1.0 / 3.0);
}

TEST(Similarity, Mixture) {
  EXPECT_EQ(mixture_similarity(0.1, 0.1), 1.0);
  EXPECT_NEAR(mixture_similarity(0.1, 0.9), 0.2, 1e-15);
  EXPECT_NEAR(mixture_similarity(0.1, 0.4), 0.7, 1e-15);
  for (int a = 0; a <= 10; ++a) {
    for (int b = 0; b <= 10; ++b) {
      const double s = mixture_similarity(a / 10.0, b / 10.0);
      EXPECT_EQ(s, mixture_similarity(b / 10.0, a / 10.0));
      EXPECT_EQ(s == 1.0, a == b);
      EXPECT_GE(s, 0.0);
    }
  }
  EXPECT_THROW(mixture_similarity(1.5, 0.0), ConfigError);
}

TEST(TaskSchedule, Validation) {
  TaskSchedule s;
  EXPECT_THROW(s.validate(), ConfigError);
  s.tasks.push_back({window_family(0, 2, 4), 0});
  EXPECT_THROW(s.validate(), ConfigError);
  s.tasks.front().epochs = 1;
  EXPECT_NO_THROW(s.validate());
}

TEST(SampleBatch, PointMass) {
  const Dataset data = small_data(4, 10);
  SamplerState st(data, 1);
  for (std::size_t idx : sample_batch(window_family(2, 1, 4), data, 100, st)) EXPECT_EQ(data.labels[idx], 2u);
}

TEST(SampleBatch, UniformTwoClassFrequency) {
  const Dataset data = small_data(2, 50);
  for (SamplingMode mode : {SamplingMode::epoch_pools, SamplingMode::iid}) {
    SamplerState st(data, 7, mode);
    const auto idx = sample_batch(window_family(0, 2, 2), data, 10000, st);
    double zeros = 0.0;
    for (std::size_t i : idx) zeros += data.labels[i] == 0;
    EXPECT_NEAR(zeros / 1e4, 0.5, 3.0 * std::sqrt(0.25 / 1e4)) << to_string(mode);
  }
}

TEST(SampleBatch, MixtureFrequency) {
  const Dataset data = small_data(10, 20);
  SamplerState st(data, 3);
  const auto idx = sample_batch(mixture_family(0.9), data, 10000, st);
  double upper = 0.0;
  for (std::size_t i : idx) upper += data.labels[i] >= 5;
  EXPECT_NEAR(upper / 1e4, 0.9, 3.0 * std::sqrt(0.09 / 1e4));
}

TEST(SampleBatch, EpochPoolsCoverEachClassBeforeRepeating) {
  const Dataset data = small_data(3, 12);
  SamplerState st(data, 5);
  for (int pass = 0; pass < 3; ++pass) {
    std::vector<std::size_t> seen;
    for (int k = 0; k < 12; ++k) seen.push_back(st.draw_from_class(1));
    std::sort(seen.begin(), seen.end());
    EXPECT_EQ(std::adjacent_find(seen.begin(), seen.end()), seen.end()) << "pass " << pass;
    for (std::size_t i : seen) EXPECT_EQ(data.labels[i], 1u);
  }
  EXPECT_EQ(st.wraps(), 2u);
}

TEST(SampleBatch, MissingClassIsError) {
  const Dataset data = small_data(3, 5);
  SamplerState st(data, 1);
  EXPECT_THROW(sample_batch(window_family(3, 2, 5), data, 4, st), DataError);
}

TEST(SampleBatch, DeterministicForASeed) {
  const Dataset data = small_data(5, 20);
  SamplerState a(data, 11), b(data, 11);
  EXPECT_EQ(sample_batch(mixture_family(0.3, range(0, 2), range(2, 5)), data, 200, a),
            sample_batch(mixture_family(0.3, range(0, 2), range(2, 5)), data, 200, b));
}
