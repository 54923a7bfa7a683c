#include "ntklab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "ntklab/error.hpp"

namespace ntklab {

Tensor Dataset::tensor(std::size_t i) const {
  auto img = image(i);
  return Tensor(image_shape, std::vector<double>(img.begin(), img.end()));
}

std::vector<std::vector<std::size_t>> Dataset::class_index() const {
  std::vector<std::vector<std::size_t>> index(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) index[labels[i]].push_back(i);
  return index;
}

Dataset Dataset::filter_classes(std::span<const std::size_t> classes) const {
  Dataset out;
  out.image_shape = image_shape;
  out.num_classes = num_classes;
  out.split = split;
  for (std::size_t i = 0; i < size(); ++i) {
    if (std::find(classes.begin(), classes.end(), labels[i]) == classes.end()) continue;
    out.labels.push_back(labels[i]);
    auto img = image(i);
    out.pixels.insert(out.pixels.end(), img.begin(), img.end());
  }
  return out;
}

namespace {

constexpr std::size_t kCifarSide = 32;
constexpr std::size_t kCifarPixels = 3 * kCifarSide * kCifarSide;

void append_cifar_file(const std::filesystem::path& path, Dataset& data) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open CIFAR file " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t records = bytes.size() / kCifarRecordBytes;
  if (bytes.size() % kCifarRecordBytes != 0) {
    throw DataError("truncated CIFAR record in " + path.string() + " at byte offset " +
                    std::to_string(records * kCifarRecordBytes) + " (file has " + std::to_string(bytes.size()) +
                    " bytes)");
  }
  data.pixels.reserve(data.pixels.size() + records * kCifarPixels);
  for (std::size_t r = 0; r < records; ++r) {
    const unsigned char* rec = bytes.data() + r * kCifarRecordBytes;
    const std::size_t label = rec[0];
    if (label >= data.num_classes) {
      throw DataError("CIFAR label " + std::to_string(label) + " at byte offset " +
                      std::to_string(r * kCifarRecordBytes) + " exceeds " + std::to_string(data.num_classes) +
                      " classes");
    }
    data.labels.push_back(label);
    for (std::size_t p = 0; p < kCifarPixels; ++p) data.pixels.push_back(rec[1 + p] / 255.0);
  }
}

}  // namespace

Dataset load_cifar_binary(std::span<const std::filesystem::path> paths, Split split) {
  Dataset data;
  data.image_shape = {3, kCifarSide, kCifarSide};
  data.num_classes = 10;
  data.split = split;
  for (const auto& p : paths) append_cifar_file(p, data);
  return data;
}

Dataset load_cifar_binary(const std::filesystem::path& path, Split split) {
  return load_cifar_binary(std::span<const std::filesystem::path>(&path, 1), split);
}

void write_cifar_binary(const Dataset& data, const std::filesystem::path& path) {
  if (data.image_shape != Shape{3, kCifarSide, kCifarSide}) {
    throw DataError("CIFAR binary needs (3x32x32) images, got " + shape_to_string(data.image_shape));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  std::vector<char> rec(kCifarRecordBytes);
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.labels[i] > 255) throw DataError("label does not fit the one-byte CIFAR label field");
    rec[0] = static_cast<char>(data.labels[i]);
    auto img = data.image(i);
    for (std::size_t p = 0; p < kCifarPixels; ++p) {
      const double v = std::clamp(img[p], 0.0, 1.0);
      rec[1 + p] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
    }
    out.write(rec.data(), static_cast<std::streamsize>(rec.size()));
  }
  if (!out) throw DataError("write failed for " + path.string());
}

std::vector<std::vector<double>> synthetic_class_patterns(const SyntheticSpec& spec) {
  if (spec.classes < 2) throw ConfigError("synthetic dataset needs at least 2 classes");
  if (spec.image_shape.size() != 3) throw ConfigError("synthetic images must be (C, H, W)");
  const std::size_t channels = spec.image_shape[0], h = spec.image_shape[1], w = spec.image_shape[2];
  std::mt19937_64 rng(spec.seed * 0x9E3779B97F4A7C15ULL + 0x5eed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<std::vector<double>> patterns;
  patterns.reserve(spec.classes);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    // Two blobs per class so that no class pattern is a scaled copy of another.
    std::vector<double> img(channels * h * w, 0.0);
    for (int blob = 0; blob < 2; ++blob) {
      const double cy = unit(rng) * static_cast<double>(h - 1);
      const double cx = unit(rng) * static_cast<double>(w - 1);
      const double radius = 0.75 + unit(rng) * 0.125 * static_cast<double>(std::min(h, w));
      std::vector<double> amp(channels);
      for (double& a : amp) a = 0.25 + 0.75 * unit(rng);
      for (std::size_t ch = 0; ch < channels; ++ch) {
        for (std::size_t y = 0; y < h; ++y) {
          for (std::size_t x = 0; x < w; ++x) {
            const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
            const double v = amp[ch] * std::exp(-(dy * dy + dx * dx) / (2.0 * radius * radius));
            double& px = img[(ch * h + y) * w + x];
            px = std::min(1.0, px + v);
          }
        }
      }
    }
    patterns.push_back(std::move(img));
  }
  return patterns;
}

Dataset synthetic_dataset(const SyntheticSpec& spec, Split split) {
  const auto patterns = synthetic_class_patterns(spec);
  if (!(spec.noise >= 0.0)) throw ConfigError("synthetic noise must be non-negative");
  Dataset data;
  data.image_shape = spec.image_shape;
  data.num_classes = spec.classes;
  data.split = split;
  const std::size_t d = shape_size(spec.image_shape);
  data.pixels.reserve(spec.classes * spec.per_class * d);
  data.labels.reserve(spec.classes * spec.per_class);

  std::mt19937_64 rng(spec.seed * 0xD1B54A32D192ED03ULL + (split == Split::train ? 0x7a11 : 0x7e57));
  std::normal_distribution<double> gauss(0.0, 1.0);
  // Interleave classes so that any prefix of the dataset is roughly class-balanced.
  for (std::size_t i = 0; i < spec.per_class; ++i) {
    for (std::size_t c = 0; c < spec.classes; ++c) {
      data.labels.push_back(c);
      for (std::size_t p = 0; p < d; ++p) {
        const double v = patterns[c][p] + spec.noise * gauss(rng);
        data.pixels.push_back(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return data;
}

}  // namespace ntklab
