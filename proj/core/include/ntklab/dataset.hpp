#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ntklab/tensor.hpp"

namespace ntklab {

enum class Split { train, test };

/// Labelled images stored as flat rows of C*H*W values in [0, 1].
struct Dataset {
  Shape image_shape;
  std::size_t num_classes = 0;
  Split split = Split::train;
  std::vector<double> pixels;
  std::vector<std::size_t> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t image_size() const { return shape_size(image_shape); }
  std::span<const double> image(std::size_t i) const {
    return std::span<const double>(pixels).subspan(i * image_size(), image_size());
  }
  Tensor tensor(std::size_t i) const;

  /// Indices of samples of each class, in dataset order.
  std::vector<std::vector<std::size_t>> class_index() const;
  /// Subset restricted to the given classes (labels unchanged).
  Dataset filter_classes(std::span<const std::size_t> classes) const;
};

/// CIFAR-10 binary layout: 3073-byte records, one label byte followed by 32x32 R, G and B planes.
inline constexpr std::size_t kCifarRecordBytes = 3073;

Dataset load_cifar_binary(const std::filesystem::path& path, Split split = Split::train);
Dataset load_cifar_binary(std::span<const std::filesystem::path> paths, Split split = Split::train);
/// Pixels are quantized as round(255 * v); the dataset must have shape (3, 32, 32).
void write_cifar_binary(const Dataset& data, const std::filesystem::path& path);

struct SyntheticSpec {
  std::size_t classes = 10;
  std::size_t per_class = 100;
  Shape image_shape{3, 8, 8};
  /// Standard deviation of the additive per-pixel Gaussian noise.
  double noise = 0.1;
  std::uint64_t seed = 0;

  friend bool operator==(const SyntheticSpec&, const SyntheticSpec&) = default;
};

/// Class-conditional Gaussian-blob images: each class owns a smooth blob pattern (random
/// centre, width and per-channel amplitude) derived from `seed`; samples add i.i.d. Gaussian
/// pixel noise and clamp to [0, 1]. Train and test draw disjoint noise streams around the
/// same class patterns.
Dataset synthetic_dataset(const SyntheticSpec& spec, Split split = Split::train);

/// The noiseless class patterns used by synthetic_dataset, one row per class.
std::vector<std::vector<double>> synthetic_class_patterns(const SyntheticSpec& spec);

}  // namespace ntklab
