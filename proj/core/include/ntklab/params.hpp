#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ntklab/tensor.hpp"

namespace ntklab {

enum class ParamRole { weight, bias };

/// One contiguous slice of the flat parameter vector owned by a layer.
struct ParamSegment {
  std::size_t layer = 0;
  ParamRole role = ParamRole::weight;
  Shape shape;
  std::size_t offset = 0;

  std::size_t size() const { return shape_size(shape); }
  friend bool operator==(const ParamSegment&, const ParamSegment&) = default;
};

/// Flattened network parameters: the coordinate system in which every gradient is expressed.
///
/// Segments partition [0, dim()) in order. Every mutating access refreshes token(); a Tape
/// remembers the token it saw so that backward passes against mutated parameters are caught.
class ParamVector {
 public:
  ParamVector() = default;
  /// Zero-initialized storage for `segments`.
  explicit ParamVector(std::vector<ParamSegment> segments);
  ParamVector(std::vector<ParamSegment> segments, std::vector<double> data);

  std::size_t dim() const { return data_.size(); }
  const std::vector<ParamSegment>& segments() const { return segments_; }

  std::span<const double> values() const { return data_; }
  std::span<double> mutable_values();

  std::span<const double> segment(std::size_t i) const;
  std::span<double> mutable_segment(std::size_t i);

  /// Per-segment copies, in segment order.
  std::vector<std::vector<double>> layer_views() const;
  /// Inverse of layer_views().
  static ParamVector from_layer_views(std::vector<ParamSegment> segments,
                                      const std::vector<std::vector<double>>& views);

  /// this += alpha * other.
  void axpy(double alpha, const ParamVector& other);
  void scale(double alpha);
  void fill(double value);
  double dot(const ParamVector& other) const;
  double norm() const;
  bool all_finite() const;
  bool same_layout(const ParamVector& other) const { return segments_ == other.segments_; }

  std::uint64_t token() const { return token_; }

  friend bool operator==(const ParamVector& a, const ParamVector& b) {
    return a.segments_ == b.segments_ && a.data_ == b.data_;
  }

 private:
  void touch();

  std::vector<ParamSegment> segments_;
  AlignedBuffer data_;
  std::uint64_t token_ = 0;
};

}  // namespace ntklab
