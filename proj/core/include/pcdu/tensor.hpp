#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace pcdu {

#ifdef PCDU_SINGLE_PRECISION
using Real = float;
#else
using Real = double;
#endif

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array. Rank-2 tensors are the workhorse: rows are points
/// (or batch entries) and columns are channels.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Real fill = Real(0));
  Tensor(Shape shape, std::vector<Real> values);

  static Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<Real> values);
  static Tensor vector(std::initializer_list<Real> values);
  static Tensor scalar(Real value) { return Tensor({1}, {value}); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  /// Leading extent; 1 for rank-0-like tensors.
  std::size_t rows() const noexcept { return shape_.empty() ? 1 : shape_[0]; }
  /// Product of every dimension after the first; 1 for rank < 2.
  std::size_t cols() const noexcept {
    std::size_t c = 1;
    for (std::size_t i = 1; i < shape_.size(); ++i) c *= shape_[i];
    return c;
  }

  Real* data() noexcept { return values_.data(); }
  const Real* data() const noexcept { return values_.data(); }
  std::span<Real> values() noexcept { return values_; }
  std::span<const Real> values() const noexcept { return values_; }
  std::span<Real> row(std::size_t r) noexcept { return {values_.data() + r * cols(), cols()}; }
  std::span<const Real> row(std::size_t r) const noexcept {
    return {values_.data() + r * cols(), cols()};
  }

  Real& operator[](std::size_t i) noexcept { return values_[i]; }
  Real operator[](std::size_t i) const noexcept { return values_[i]; }
  Real& operator()(std::size_t r, std::size_t c) noexcept { return values_[r * cols() + c]; }
  Real operator()(std::size_t r, std::size_t c) const noexcept { return values_[r * cols() + c]; }

  void fill(Real value);
  Tensor reshaped(Shape shape) const;

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<Real> values_;
};

bool all_finite(const Tensor& t);

}  // namespace pcdu
