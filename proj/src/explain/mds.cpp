#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "tsc/error.hpp"
#include "tsc/explain.hpp"
#include "tsc/rng.hpp"

namespace tsc::explain {

namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Mat to_mat(const Tensor& t) {
  return Eigen::Map<const Mat>(t.data(), Eigen::Index(t.dim(0)), Eigen::Index(t.dim(1)));
}

Tensor to_tensor(const Mat& m) {
  Tensor t(Shape{std::size_t(m.rows()), std::size_t(m.cols())});
  Eigen::Map<Mat>(t.data(), m.rows(), m.cols()) = m;
  return t;
}

void validate(const Tensor& d) {
  if (d.rank() != 2 || d.dim(0) != d.dim(1)) throw ShapeError("distance matrix must be square");
  const std::size_t n = d.dim(0);
  if (n < 2) throw std::invalid_argument("MDS needs at least two points");
  double peak = 0;
  for (double v : d.values()) {
    if (!std::isfinite(v) || v < 0) throw std::invalid_argument("distances must be finite and non-negative");
    peak = std::max(peak, v);
  }
  if (peak == 0) throw DegenerateError("all distances are zero; nothing to embed");
  for (std::size_t i = 0; i < n; ++i) {
    if (d.at(i, i) != 0) throw std::invalid_argument("distance matrix diagonal must be zero");
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(d.at(i, j) - d.at(j, i)) > 1e-12 * peak)
        throw std::invalid_argument("distance matrix must be symmetric");
  }
}

// Dominant eigenpair of a symmetric matrix by power iteration. `shift` is
// added to the diagonal so the iteration can target the top of the spectrum.
// Starting from the squared row norms keeps the result equivariant under a
// permutation of the points; a random start covers the symmetric cases where
// that vector is annihilated.
std::pair<double, Eigen::VectorXd> power_iteration(const Mat& a, double shift, Rng& rng) {
  const Eigen::Index n = a.rows();
  Eigen::VectorXd v = a.rowwise().squaredNorm();
  if ((a * v + shift * v).norm() <= 1e-12 * v.norm() * (a.norm() + std::abs(shift))) {
    for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.uniform(-1, 1);
  }
  if (v.norm() == 0) return {0.0, Eigen::VectorXd::Zero(n)};
  v.normalize();
  double lambda = 0;
  for (int it = 0; it < 5000; ++it) {
    Eigen::VectorXd w = a * v + shift * v;
    const double norm = w.norm();
    if (norm == 0) return {-shift, v};
    w /= norm;
    const double change = std::min((w - v).norm(), (w + v).norm());
    v = w;
    lambda = v.dot(a * v);
    if (change < 1e-13) break;
  }
  return {lambda, v};
}

Mat pairwise(const Mat& x) {
  const Eigen::Index n = x.rows();
  Mat d(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d(i, i) = 0;
    for (Eigen::Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = (x.row(i) - x.row(j)).norm();
  }
  return d;
}

double stress_of(const Mat& d, const Mat& x) {
  const Mat e = pairwise(x);
  return std::sqrt((d - e).squaredNorm() / d.squaredNorm());
}

}  // namespace

Tensor distance_matrix(const Tensor& f) {
  if (f.rank() != 2) throw ShapeError("features must be [N, F], got " + to_string(f.shape()));
  return to_tensor(pairwise(to_mat(f)));
}

double stress(const Tensor& d, const Tensor& points) {
  if (d.dim(0) != points.dim(0)) throw ShapeError("stress: point count differs from distance matrix");
  return stress_of(to_mat(d), to_mat(points));
}

Tensor classical_mds(const Tensor& distances, std::size_t dims) {
  validate(distances);
  const Mat d = to_mat(distances);
  const Eigen::Index n = d.rows();
  const Mat j = Mat::Identity(n, n) - Mat::Constant(n, n, 1.0 / double(n));
  Mat b = -0.5 * j * d.cwiseProduct(d) * j;
  b = 0.5 * (b + b.transpose());

  Rng rng(0x6d6473);
  Mat x = Mat::Zero(n, Eigen::Index(dims));
  for (std::size_t k = 0; k < dims; ++k) {
    auto [lambda, v] = power_iteration(b, 0.0, rng);
    if (lambda < 0) {
      // dominant magnitude is negative: shift so the largest algebraic wins
      std::tie(lambda, v) = power_iteration(b, -lambda, rng);
    }
    if (lambda > 0) x.col(Eigen::Index(k)) = v * std::sqrt(lambda);
    b -= lambda * v * v.transpose();
  }
  return to_tensor(x);
}

MdsEmbedding mds_embed(const Tensor& distances, const MdsOptions& options) {
  MdsEmbedding out;
  out.distances = distances;
  Mat x = to_mat(classical_mds(distances, 2));
  const Mat d = to_mat(distances);
  const Eigen::Index n = d.rows();

  double s = stress_of(d, x);
  out.stress_trace.push_back(s);
  for (std::size_t it = 0; it < options.max_iterations && s > 0; ++it) {
    // Guttman transform X <- B(X) X / N
    const Mat e = pairwise(x);
    Mat bx = Mat::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index k = 0; k < n; ++k)
        if (i != k && e(i, k) > 0) bx(i, k) = -d(i, k) / e(i, k);
      bx(i, i) = -bx.row(i).sum();
    }
    const Mat next = bx * x / double(n);
    const double s_next = stress_of(d, next);
    if (s_next > s) break;
    x = next;
    out.stress_trace.push_back(s_next);
    out.iterations = it + 1;
    const double change = (s - s_next) / s;
    s = s_next;
    if (change < options.tolerance) break;
  }
  out.points = to_tensor(x);
  out.stress = s;
  return out;
}

}  // namespace tsc::explain
