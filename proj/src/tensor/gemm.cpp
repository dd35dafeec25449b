#include "gemm.hpp"

#include <Eigen/Core>

namespace tsc::detail {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstView = Eigen::Map<const RowMat, Eigen::Unaligned, Eigen::OuterStride<>>;
using View = Eigen::Map<RowMat, Eigen::Unaligned, Eigen::OuterStride<>>;

ConstView map(const MatView& m) {
  return ConstView(m.data, Eigen::Index(m.rows), Eigen::Index(m.cols),
                   Eigen::OuterStride<>(Eigen::Index(m.stride)));
}

template <class A, class B>
void run(const A& a, const B& b, View& c, bool accumulate) {
  if (accumulate) {
    c.noalias() += a * b;
  } else {
    c.noalias() = a * b;
  }
}

}  // namespace

void gemm(const MatView& a, const MatView& b, double* c, std::size_t ldc, bool accumulate) {
  const std::size_t m = a.transposed ? a.cols : a.rows;
  const std::size_t n = b.transposed ? b.rows : b.cols;
  View out(c, Eigen::Index(m), Eigen::Index(n), Eigen::OuterStride<>(Eigen::Index(ldc)));
  const auto ma = map(a);
  const auto mb = map(b);
  if (a.transposed && b.transposed) {
    run(ma.transpose(), mb.transpose(), out, accumulate);
  } else if (a.transposed) {
    run(ma.transpose(), mb, out, accumulate);
  } else if (b.transposed) {
    run(ma, mb.transpose(), out, accumulate);
  } else {
    run(ma, mb, out, accumulate);
  }
}

}  // namespace tsc::detail
