#pragma once

#include <cstddef>

namespace tsc::detail {

/// Row-major strided matrix view over a raw buffer.
struct MatView {
  const double* data;
  std::size_t rows;
  std::size_t cols;
  std::size_t stride;  // distance between consecutive rows
  bool transposed = false;
};

/// C[rows(A) x cols(B)] (+)= op(A) * op(B), C row-major with row stride `ldc`.
void gemm(const MatView& a, const MatView& b, double* c, std::size_t ldc, bool accumulate);

}  // namespace tsc::detail
