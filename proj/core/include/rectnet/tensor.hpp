#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "rectnet/error.hpp"

namespace rectnet {

using Shape = std::vector<std::size_t>;

[[nodiscard]] inline std::size_t shape_size(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

[[nodiscard]] std::string shape_string(const Shape& s);

/// Row-major dense tensor of up to four dimensions.
template <typename T>
struct Tensor {
  Shape shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T{}) : shape(std::move(s)), data(shape_size(shape), fill) {
    if (shape.size() > 4) throw ShapeError("tensors have at most four dimensions");
  }
  Tensor(Shape s, std::vector<T> values) : shape(std::move(s)), data(std::move(values)) {
    if (shape.size() > 4) throw ShapeError("tensors have at most four dimensions");
    if (data.size() != shape_size(shape)) throw ShapeError("tensor value count does not match shape");
  }

  [[nodiscard]] std::size_t size() const { return data.size(); }
  [[nodiscard]] std::size_t dim(std::size_t i) const { return shape.at(i); }
  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }
  bool operator==(const Tensor&) const = default;
};

/// A trainable tensor with its gradient accumulator.
template <typename T>
struct Parameter {
  std::string name;
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;

  Parameter() = default;
  Parameter(std::string n, Shape s) : name(std::move(n)), shape(std::move(s)), value(shape_size(shape)), grad(value.size()) {}
  [[nodiscard]] std::size_t size() const { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T{}); }
};

}  // namespace rectnet
