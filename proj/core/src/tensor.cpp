#include "pcdu/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include "pcdu/errors.hpp"

namespace pcdu {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor::Tensor(Shape shape, Real fill) : shape_(std::move(shape)) {
  for (auto e : shape_) {
    if (e == 0) throw DimensionError("Tensor", "shape", "zero extent in " + shape_string(shape_));
  }
  values_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<Real> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != shape_size(shape_)) {
    throw DimensionError("Tensor", "values",
                         std::to_string(values_.size()) + " values for shape " + shape_string(shape_));
  }
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::initializer_list<Real> values) {
  return Tensor({rows, cols}, std::vector<Real>(values));
}

Tensor Tensor::vector(std::initializer_list<Real> values) {
  return Tensor({values.size()}, std::vector<Real>(values));
}

void Tensor::fill(Real value) { std::fill(values_.begin(), values_.end(), value); }

Tensor Tensor::reshaped(Shape shape) const { return Tensor(std::move(shape), values_); }

bool all_finite(const Tensor& t) {
  for (Real v : t.values()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace pcdu
