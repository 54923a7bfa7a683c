#include "ntklab/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "ntklab/error.hpp"

namespace ntklab {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw ConfigError("tensor shape must have at least one dimension");
  for (std::size_t d : shape) {
    if (d == 0) throw ConfigError("tensor dimensions must be positive, got " + shape_to_string(shape));
  }
}

}  // namespace

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(shape_size(shape_), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(data.begin(), data.end()) {
  check_shape(shape_);
  if (shape_size(shape_) != data_.size()) {
    throw ConfigError("tensor shape " + shape_to_string(shape_) + " does not match " +
                      std::to_string(data_.size()) + " values");
  }
  if (!all_finite()) throw NumericalError("tensor constructed with non-finite entries");
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::reshaped(Shape shape) const {
  check_shape(shape);
  if (shape_size(shape) != data_.size()) {
    throw ConfigError("tensor shape " + shape_to_string(shape) + " does not match " + std::to_string(data_.size()) +
                      " values");
  }
  Tensor t = *this;
  t.shape_ = std::move(shape);
  return t;
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace ntklab
