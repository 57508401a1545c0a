#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace rfmt {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major array of doubles. Rank 0 (empty shape) holds one scalar.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() : data(1, 0.0) {}
  explicit Tensor(Shape s, double fill = 0.0);
  Tensor(Shape s, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t axis) const { return shape.at(axis); }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }
  double item() const { return data.at(0); }

  std::span<double> row(std::size_t i);
  std::span<const double> row(std::size_t i) const;

  bool all_finite() const;
};

// Product of dims before `axis`, the dim itself, and product after it.
struct AxisSplit {
  std::size_t outer;
  std::size_t extent;
  std::size_t inner;
};
AxisSplit split_at(const Shape& shape, std::size_t axis);

}  // namespace rfmt
