#pragma once

// Time-warping-invariant echo state network: random reservoir, per-step ridge
// readout, posterior averaging over time, and the hyperparameter grid search.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tsc/data.hpp"
#include "tsc/tensor.hpp"

namespace tsc::reservoir {

struct ReservoirConfig {
  std::size_t size = 32;  // N_r
  double sparsity = 0.9;  // fraction of zero entries in W
  double spectral_radius = 0.9;
  double input_scale = 1.0;
  double ridge = 1.0;  // lambda
  std::uint64_t seed = 0;

  friend bool operator==(const ReservoirConfig&, const ReservoirConfig&) = default;
};

struct Reservoir {
  Tensor w_in;  // [N_r, M]
  Tensor w;     // [N_r, N_r]
};

/// max |eigenvalue| of a square matrix, from ||A^k||^(1/k) with k = 2^j
/// obtained by repeated squaring.
double spectral_radius(const Tensor& square);

/// W has exactly round((1 - sparsity) * N_r^2) nonzeros drawn from U[-1, 1]
/// at random positions, rescaled to the requested spectral radius; W_in is
/// U[-input_scale, input_scale]. An all-zero draw retries on the next
/// substream and throws NumericalError after 5 attempts.
Reservoir init_reservoir(const ReservoirConfig& config, std::size_t dims);

/// I(t) = tanh(W_in X(t) + W I(t-1)), I(0) = 0. series [T, M] -> [T, N_r].
Tensor reservoir_states(const Reservoir& r, const Tensor& series);
/// Same recurrence from an explicit initial state [N_r].
Tensor reservoir_states(const Reservoir& r, const Tensor& series, const Tensor& initial);
/// All series of a [N, T, M] batch at once -> [N, T, N_r].
Tensor reservoir_states_batch(const Reservoir& r, const Tensor& x);

/// Rows [1, X(t), I(t)] for every step: [T, 1 + M + N_r].
Tensor readout_features(const Tensor& series, const Tensor& states);

/// W_out [K, F] with W_out^T = (A^T A + lambda I)^-1 A^T Y (Cholesky solve).
Tensor fit_ridge(const Tensor& features, const Tensor& targets, double lambda);

struct TwiesnModel {
  ReservoirConfig config;
  Reservoir reservoir;
  Tensor w_out;  // [K, 1 + M + N_r]
  std::string dataset;
  std::vector<std::string> vocabulary;
};

struct Grid {
  std::vector<std::size_t> sizes;
  std::vector<double> sparsities, radii, ridges;

  /// N_r {32, 64, 128, 256}, sparsity {0.5, 0.8, 0.9}, radius {0.25, 0.5, 0.9, 1.0}, lambda {0.01, 0.1, 1}.
  static Grid standard();
  std::size_t size() const { return sizes.size() * sparsities.size() * radii.size() * ridges.size(); }
  /// Configurations in grid order (size, sparsity, radius, ridge; last varies fastest).
  std::vector<ReservoirConfig> configs(std::uint64_t seed) const;
};

struct GridScore {
  ReservoirConfig config;
  double accuracy = 0.0;
};

struct TwiesnFit {
  TwiesnModel model;
  std::vector<GridScore> scores;  // grid order
  std::size_t best = 0;
};

/// Scores every grid point on a stratified held-out split, then refits the
/// best configuration (first on ties) on the full training set.
TwiesnFit twiesn_fit(const data::Dataset& train, const Grid& grid, std::uint64_t seed,
                     double validation_fraction = 0.2);

/// Fits one configuration on all of `train`.
TwiesnModel twiesn_fit_config(const data::Dataset& train, const ReservoirConfig& config);

struct Posterior {
  std::size_t label = 0;
  std::vector<double> probabilities;
};

/// Mean of per-step posterior rows [T, K]; label is the argmax (lowest on ties).
Posterior average_posterior(const Tensor& per_step);

/// Softmax of the per-step ridge scores, averaged over time.
Posterior twiesn_posterior(const TwiesnModel& model, const Tensor& series);
std::vector<std::size_t> twiesn_predict(const TwiesnModel& model, const data::Dataset& data);

/// Manifest plus `<path>.bin` blob (W_in, W, W_out as little-endian f64).
void save_twiesn(const TwiesnModel& model, const std::filesystem::path& manifest);
TwiesnModel load_twiesn(const std::filesystem::path& manifest);

}  // namespace tsc::reservoir
