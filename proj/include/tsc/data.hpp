#pragma once

// Dataset ingestion, resampling, splits and the slicing/warping augmentations.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "tsc/tensor.hpp"

namespace tsc::data {

/// N labelled series sharing length T and dimensionality M.
struct Dataset {
  std::string name;
  std::string theme;
  Tensor x;                              // [N, T, M]
  std::vector<std::size_t> labels;       // class index per series
  std::vector<std::string> vocabulary;   // class index -> original label, sorted ascending
  std::size_t min_length = 0;            // original length range before interpolation
  std::size_t max_length = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t length() const { return x.dim(1); }
  std::size_t dims() const { return x.dim(2); }
  std::size_t classes() const { return vocabulary.size(); }

  /// [N, K] one-hot targets.
  Tensor targets() const;
  /// Series i as a [T, M] tensor.
  Tensor series(std::size_t i) const;
  /// New dataset holding the listed rows, in order.
  Dataset subset(const std::vector<std::size_t>& rows) const;
};

/// Sorts labels ascending: numerically when every label parses as a number,
/// lexicographically otherwise. Duplicates are removed.
std::vector<std::string> make_vocabulary(std::vector<std::string> labels);

/// Class index of every label. Unknown labels throw VocabularyError.
std::vector<std::size_t> encode_labels(const std::vector<std::string>& labels,
                                       const std::vector<std::string>& vocabulary);

/// [N, K] with a single 1 per row at the label's vocabulary index.
Tensor one_hot(const std::vector<std::string>& labels, const std::vector<std::string>& vocabulary);
Tensor one_hot(const std::vector<std::size_t>& labels, std::size_t classes);

// ---- univariate archive format ------------------------------------------------

/// One series per line: `label<d>v1<d>...<d>vT`, the delimiter (comma or tab)
/// taken from the first line. The vocabulary is built from both files.
std::pair<Dataset, Dataset> load_ucr(const std::filesystem::path& train, const std::filesystem::path& test);

struct UcrRows {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> values;
};
UcrRows parse_ucr(std::istream& in);

// ---- multivariate long format -------------------------------------------------

/// Series of possibly different lengths as read from the long format.
struct RaggedSeries {
  std::vector<std::string> ids;
  std::vector<std::string> labels;
  std::vector<Tensor> series;  // [T_i, M]
};

/// Header `series_id,dimension,timestamp,value,label`. Rows may come in any
/// order; series keep first-appearance order, dimensions are sorted.
RaggedSeries load_mts_long(const std::filesystem::path& path);
RaggedSeries parse_mts_long(std::istream& in);
void write_mts_long(const RaggedSeries& data, std::ostream& out);

/// Interpolates every series to `target_length` (0: the longest series).
Dataset to_dataset(const RaggedSeries& data, const std::vector<std::string>& vocabulary,
                   std::size_t target_length = 0);

/// Loads a train/test pair and interpolates both to the longest series found
/// in either file.
std::pair<Dataset, Dataset> load_mts_pair(const std::filesystem::path& train, const std::filesystem::path& test);

// ---- resampling -----------------------------------------------------------------

/// Piecewise-linear resampling of [T, M] at `target` equally spaced positions
/// over [0, T-1]. Requires T >= 2 and target >= 2.
Tensor resample(const Tensor& series, std::size_t target);

/// Stretch to a longer length; endpoints are preserved. Requires target >= T.
Tensor linear_interpolate(const Tensor& series, std::size_t target);

/// Resample to round(factor * T) points.
Tensor window_warp(const Tensor& series, double factor);

// ---- window slicing ---------------------------------------------------------------

struct SlicingConfig {
  double fraction = 0.9;
  std::size_t stride = 1;
  std::vector<double> warps;  // empty: no warping
};

/// ceil(fraction * length), with protection against floating-point spill.
std::size_t slice_length(std::size_t length, double fraction);

/// Starts 0, stride, 2*stride, ... plus the start of the slice ending at T.
std::vector<std::size_t> slice_starts(std::size_t length, std::size_t slice, std::size_t stride);

struct SlicedDataset {
  Dataset slices;
  std::vector<std::size_t> parent;  // slice -> original series
};

/// Cuts every series into windows of `slice` steps.
SlicedDataset window_slice(const Dataset& data, std::size_t slice, std::size_t stride);

/// Slices with length ceil(fraction * T).
SlicedDataset window_slice(const Dataset& data, double fraction, std::size_t stride);

/// Common slice length when every series is first warped by each factor:
/// ceil(fraction * shortest warped length).
std::size_t augmented_slice_length(std::size_t length, const SlicingConfig& config);

/// Warps (when configured) then slices every series to the common length.
SlicedDataset augment(const Dataset& data, const SlicingConfig& config);

// ---- splits -------------------------------------------------------------------------

struct Split {
  std::vector<std::size_t> train, validation;
};

/// Stratified, seeded split. Each class contributes round(fraction * count)
/// rows (at least one when it has two or more members) to validation.
Split split_indices(const Dataset& data, double fraction, std::uint64_t seed);
std::pair<Dataset, Dataset> split_train_val(const Dataset& data, double fraction, std::uint64_t seed);

}  // namespace tsc::data
