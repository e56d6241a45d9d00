#pragma once

#include <algorithm>

#include <Eigen/Core>

#include "pcdu/tensor.hpp"

namespace pcdu::detail {

using RowMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

inline MatrixMap as_matrix(Tensor& t) {
  return MatrixMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}
inline ConstMatrixMap as_matrix(const Tensor& t) {
  return ConstMatrixMap(t.data(), static_cast<Eigen::Index>(t.rows()),
                        static_cast<Eigen::Index>(t.cols()));
}

/// out = a · b where every entry is the plain sum over t = 0..k-1 of
/// a(r,t)·b(t,c), accumulated in that order. The result for a row does not
/// depend on where the row sits, unlike blocked GEMM whose panel tails take
/// other code paths. Rows therefore permute exactly.
inline void row_stable_product(const Tensor& a, const Tensor& b, Tensor& out) {
  const std::size_t k = a.cols();
  const std::size_t rows = a.rows();
  const std::size_t cols = b.cols();
  const Real* A = a.data();
  const Real* B = b.data();
  Real* O = out.data();
  constexpr std::size_t TR = 4, TC = 8;
  const std::size_t rows_main = rows - rows % TR, cols_main = cols - cols % TC;
  for (std::size_t r0 = 0; r0 < rows_main; r0 += TR) {
    for (std::size_t c0 = 0; c0 < cols_main; c0 += TC) {
      Real acc[TR][TC] = {};
      for (std::size_t t = 0; t < k; ++t) {
        const Real* bt = B + t * cols + c0;
        for (std::size_t i = 0; i < TR; ++i) {
          const Real s = A[(r0 + i) * k + t];
          for (std::size_t j = 0; j < TC; ++j) acc[i][j] += s * bt[j];
        }
      }
      for (std::size_t i = 0; i < TR; ++i)
        for (std::size_t j = 0; j < TC; ++j) O[(r0 + i) * cols + c0 + j] = acc[i][j];
    }
  }
  // leftovers: same per-entry arithmetic, no tiling
  auto single = [&](std::size_t r, std::size_t c) {
    Real acc = 0;
    for (std::size_t t = 0; t < k; ++t) acc += A[r * k + t] * B[t * cols + c];
    O[r * cols + c] = acc;
  };
  for (std::size_t r = 0; r < rows_main; ++r)
    for (std::size_t c = cols_main; c < cols; ++c) single(r, c);
  for (std::size_t r = rows_main; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) single(r, c);
}

}  // namespace pcdu::detail
