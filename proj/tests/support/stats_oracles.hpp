#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace tsc::check {

// Tie-mean rank of |d_i| by counting, then all 2^n sign flips.
inline double brute_force_wilcoxon(const std::vector<double>& d) {
  const std::size_t n = d.size();
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) {
    double less = 0, equal = 0;
    for (std::size_t j = 0; j < n; ++j) {
      less += std::abs(d[j]) < std::abs(d[i]);
      equal += std::abs(d[j]) == std::abs(d[i]);
    }
    r[i] = less + (equal + 1) / 2;
  }
  double plus = 0, minus = 0;
  for (std::size_t i = 0; i < n; ++i) (d[i] > 0 ? plus : minus) += r[i];
  const double w = std::min(plus, minus);
  std::size_t hits = 0;
  for (std::size_t mask = 0; mask < (std::size_t(1) << n); ++mask) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1) s += r[i];
    hits += s <= w + 1e-9;
  }
  return std::min(1.0, 2.0 * double(hits) / double(std::size_t(1) << n));
}

// Composite Simpson on the chi-square density over [x, upper].
inline double integrated_tail(double x, double df) {
  const double upper = x + 200.0, n = 200000;
  const double h = (upper - x) / n;
  auto pdf = [&](double t) {
    return std::exp((df / 2 - 1) * std::log(t) - t / 2 - (df / 2) * std::log(2.0) - std::lgamma(df / 2));
  };
  double s = pdf(x) + pdf(upper);
  for (int i = 1; i < int(n); ++i) s += pdf(x + i * h) * (i % 2 ? 4 : 2);
  return s * h / 3;
}

}  // namespace tsc::check
