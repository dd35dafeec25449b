#pragma once

#include <Eigen/Dense>

#include "tsc/data.hpp"
#include "tsc/models.hpp"
#include "tsc/rng.hpp"

namespace tsc::check {

// Every parameter and buffer drawn at random so biases and BN statistics
// are not at their trivial initial values.
inline models::Network random_network(models::Architecture a, std::size_t T, std::size_t M, std::size_t K, std::uint64_t seed) {
  models::Network net(models::build(a, T, M, K), seed);
  Rng rng(seed + 1000);
  for (auto* p : net.params())
    for (auto& v : p->value.values()) v = rng.uniform(-0.3, 0.3);
  for (auto* b : net.buffers())
    for (auto& v : b->values()) v = rng.uniform(0.5, 1.5);
  return net;
}

inline Eigen::MatrixXd dense(const Tensor& t) {
  Eigen::MatrixXd m(t.dim(0), t.dim(1));
  for (std::size_t i = 0; i < t.dim(0); ++i)
    for (std::size_t j = 0; j < t.dim(1); ++j) m(long(i), long(j)) = t.at(i, j);
  return m;
}

// Dense QR-based eigenvalues.
inline double eigen_radius(const Tensor& t) {
  return Eigen::EigenSolver<Eigen::MatrixXd>(dense(t), false).eigenvalues().cwiseAbs().maxCoeff();
}

// class = sign of the series mean
inline data::Dataset sign_of_mean(std::size_t n, std::size_t T, std::uint64_t seed) {
  Rng rng(seed);
  data::Dataset d;
  d.name = "Sign";
  d.vocabulary = {"neg", "pos"};
  d.x = Tensor(Shape{n, T, 1});
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = i % 2;
    d.labels.push_back(label);
    const double mean = (label ? 1.0 : -1.0) * rng.uniform(0.3, 1.0);
    for (std::size_t t = 0; t < T; ++t) d.x.at(i, t, 0) = mean + rng.uniform(-0.5, 0.5);
  }
  return d;
}

}  // namespace tsc::check
