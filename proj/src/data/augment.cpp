#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tsc/data.hpp"

namespace tsc::data {

Tensor resample(const Tensor& series, std::size_t target) {
  if (series.rank() != 2) throw std::invalid_argument("resample: expected a [T, M] series");
  const std::size_t t = series.dim(0), m = series.dim(1);
  if (t < 2) throw std::invalid_argument("resample: series needs at least two points");
  if (target < 2) throw std::invalid_argument("resample: target length must be at least 2");
  Tensor out(Shape{target, m});
  const double step = double(t - 1) / double(target - 1);
  for (std::size_t i = 0; i < target; ++i) {
    const double pos = i + 1 == target ? double(t - 1) : double(i) * step;
    const std::size_t lo = std::min(std::size_t(pos), t - 2);
    const double frac = pos - double(lo);
    for (std::size_t d = 0; d < m; ++d) {
      const double a = series.at(lo, d), b = series.at(lo + 1, d);
      out.at(i, d) = frac == 0.0 ? a : frac == 1.0 ? b : a + frac * (b - a);
    }
  }
  return out;
}

Tensor linear_interpolate(const Tensor& series, std::size_t target) {
  if (series.rank() == 2 && target < series.dim(0)) {
    throw std::invalid_argument("linear_interpolate: target length " + std::to_string(target) +
                                " is shorter than the series (" + std::to_string(series.dim(0)) + ")");
  }
  if (series.rank() == 2 && series.dim(0) == target && target >= 2) return series;
  return resample(series, target);
}

Tensor window_warp(const Tensor& series, double factor) {
  if (!(factor > 0.0)) throw std::invalid_argument("window_warp: factor must be positive");
  const auto target = std::size_t(std::llround(factor * double(series.dim(0))));
  if (target < 2) throw std::invalid_argument("window_warp: warped length must be at least 2");
  if (target == series.dim(0)) return series;
  return resample(series, target);
}

std::size_t slice_length(std::size_t length, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("slice fraction must lie in (0, 1]");
  // 0.9 * 10 evaluates to 9.000000000000002; strip such spill before ceil.
  const double raw = fraction * double(length);
  const double rounded = std::round(raw);
  return std::size_t(std::abs(raw - rounded) < 1e-9 ? rounded : std::ceil(raw));
}

std::vector<std::size_t> slice_starts(std::size_t length, std::size_t slice, std::size_t stride) {
  if (stride == 0) throw std::invalid_argument("slice stride must be >= 1");
  if (slice == 0 || slice > length) {
    throw std::invalid_argument("slice length " + std::to_string(slice) + " does not fit series length " +
                                std::to_string(length));
  }
  std::vector<std::size_t> starts;
  const std::size_t last = length - slice;
  for (std::size_t s = 0; s <= last; s += stride) starts.push_back(s);
  if (starts.back() != last) starts.push_back(last);
  return starts;
}

SlicedDataset window_slice(const Dataset& data, std::size_t slice, std::size_t stride) {
  const std::size_t t = data.length(), m = data.dims();
  const auto starts = slice_starts(t, slice, stride);
  SlicedDataset out;
  Dataset& d = out.slices;
  d.name = data.name;
  d.theme = data.theme;
  d.vocabulary = data.vocabulary;
  d.min_length = d.max_length = slice;
  std::vector<double> buf;
  buf.reserve(data.size() * starts.size() * slice * m);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double* base = data.x.data() + i * t * m;
    for (auto s : starts) {
      buf.insert(buf.end(), base + s * m, base + (s + slice) * m);
      d.labels.push_back(data.labels[i]);
      out.parent.push_back(i);
    }
  }
  d.x = Tensor(Shape{d.labels.size(), slice, m}, std::move(buf));
  return out;
}

SlicedDataset window_slice(const Dataset& data, double fraction, std::size_t stride) {
  return window_slice(data, slice_length(data.length(), fraction), stride);
}

std::size_t augmented_slice_length(std::size_t length, const SlicingConfig& config) {
  std::size_t shortest = length;
  for (double w : config.warps) shortest = std::min(shortest, std::size_t(std::llround(w * double(length))));
  return slice_length(shortest, config.fraction);
}

SlicedDataset augment(const Dataset& data, const SlicingConfig& config) {
  if (config.warps.empty()) return window_slice(data, config.fraction, config.stride);
  const std::size_t slice = augmented_slice_length(data.length(), config);
  SlicedDataset out;
  out.slices.name = data.name;
  out.slices.theme = data.theme;
  out.slices.vocabulary = data.vocabulary;
  out.slices.min_length = out.slices.max_length = slice;
  std::vector<double> buf;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Tensor s = data.series(i);
    for (double w : config.warps) {
      const Tensor warped = window_warp(s, w);
      for (auto start : slice_starts(warped.dim(0), slice, config.stride)) {
        const double* base = warped.data() + start * warped.dim(1);
        buf.insert(buf.end(), base, base + slice * warped.dim(1));
        out.slices.labels.push_back(data.labels[i]);
        out.parent.push_back(i);
      }
    }
  }
  out.slices.x = Tensor(Shape{out.parent.size(), slice, data.dims()}, std::move(buf));
  return out;
}

}  // namespace tsc::data
