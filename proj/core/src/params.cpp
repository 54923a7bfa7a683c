#include "ntklab/params.hpp"

#include <atomic>
#include <cmath>

#include "ntklab/error.hpp"

namespace ntklab {

namespace {

std::uint64_t next_token() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

void check_partition(const std::vector<ParamSegment>& segments, std::size_t total) {
  std::size_t offset = 0;
  for (const auto& seg : segments) {
    if (seg.offset != offset) {
      throw ConfigError("parameter segments must be contiguous: expected offset " +
                        std::to_string(offset) + ", got " + std::to_string(seg.offset));
    }
    offset += seg.size();
  }
  if (offset != total) {
    throw ConfigError("parameter segments cover " + std::to_string(offset) + " entries but data has " +
                      std::to_string(total));
  }
}

std::size_t layout_size(const std::vector<ParamSegment>& segments) {
  std::size_t total = 0;
  for (const auto& seg : segments) total += seg.size();
  return total;
}

}  // namespace

ParamVector::ParamVector(std::vector<ParamSegment> segments)
    : segments_(std::move(segments)), data_(layout_size(segments_), 0.0), token_(next_token()) {
  check_partition(segments_, data_.size());
}

ParamVector::ParamVector(std::vector<ParamSegment> segments, std::vector<double> data)
    : segments_(std::move(segments)), data_(data.begin(), data.end()), token_(next_token()) {
  check_partition(segments_, data_.size());
}

void ParamVector::touch() { token_ = next_token(); }

std::span<double> ParamVector::mutable_values() {
  touch();
  return data_;
}

std::span<const double> ParamVector::segment(std::size_t i) const {
  const auto& seg = segments_.at(i);
  return std::span<const double>(data_).subspan(seg.offset, seg.size());
}

std::span<double> ParamVector::mutable_segment(std::size_t i) {
  const auto& seg = segments_.at(i);
  touch();
  return std::span<double>(data_).subspan(seg.offset, seg.size());
}

std::vector<std::vector<double>> ParamVector::layer_views() const {
  std::vector<std::vector<double>> views;
  views.reserve(segments_.size());
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    auto s = segment(i);
    views.emplace_back(s.begin(), s.end());
  }
  return views;
}

ParamVector ParamVector::from_layer_views(std::vector<ParamSegment> segments,
                                          const std::vector<std::vector<double>>& views) {
  if (views.size() != segments.size()) {
    throw ConfigError("expected " + std::to_string(segments.size()) + " layer views, got " +
                      std::to_string(views.size()));
  }
  std::vector<double> data;
  data.reserve(layout_size(segments));
  for (std::size_t i = 0; i < views.size(); ++i) {
    if (views[i].size() != segments[i].size()) {
      throw ConfigError("layer view " + std::to_string(i) + " has the wrong size");
    }
    data.insert(data.end(), views[i].begin(), views[i].end());
  }
  return ParamVector(std::move(segments), std::move(data));
}

void ParamVector::axpy(double alpha, const ParamVector& other) {
  if (other.dim() != dim()) throw ConfigError("axpy on parameter vectors of different dimension");
  touch();
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += alpha * other.data_[i];
}

void ParamVector::scale(double alpha) {
  touch();
  for (double& v : data_) v *= alpha;
}

void ParamVector::fill(double value) {
  touch();
  std::fill(data_.begin(), data_.end(), value);
}

double ParamVector::dot(const ParamVector& other) const {
  if (other.dim() != dim()) throw ConfigError("dot of parameter vectors of different dimension");
  double acc = 0.0;
  for (std::size_t i = 0; i < data_.size(); ++i) acc += data_[i] * other.data_[i];
  return acc;
}

double ParamVector::norm() const { return std::sqrt(dot(*this)); }

bool ParamVector::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace ntklab
