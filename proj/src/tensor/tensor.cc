#include "rfmt/tensor/tensor.h"

#include <cmath>
#include <numeric>

#include "rfmt/util/error.h"

namespace rfmt {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape s, double fill) : shape(std::move(s)), data(numel(shape), fill) {}

Tensor::Tensor(Shape s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
  if (numel(shape) != data.size()) {
    throw ShapeError("tensor: shape " + shape_string(shape) + " does not match " +
                     std::to_string(data.size()) + " values");
  }
}

std::span<double> Tensor::row(std::size_t i) {
  const std::size_t w = shape.empty() ? 1 : shape.back();
  return {data.data() + i * w, w};
}

std::span<const double> Tensor::row(std::size_t i) const {
  const std::size_t w = shape.empty() ? 1 : shape.back();
  return {data.data() + i * w, w};
}

bool Tensor::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + shape_string(shape));
  }
  AxisSplit s{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace rfmt
