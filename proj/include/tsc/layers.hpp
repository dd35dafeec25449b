#pragma once

// Forward and backward kernels for every layer the classifiers use.
//
// Activations are laid out [batch, time, channels] (channels fastest). All
// kernels are pure functions of their arguments; anything the backward pass
// needs is returned through an explicit cache object.

#include <cstddef>
#include <vector>

#include "tsc/rng.hpp"
#include "tsc/tensor.hpp"

namespace tsc::layers {

enum class Padding { same, valid };
enum class Mode { train, infer };
enum class Activation { linear, relu, sigmoid, tanh, softmax };
enum class PoolKind { max, avg };
enum class LossKind { cross_entropy, mse };

inline constexpr double kNormEpsilon = 1e-5;
inline constexpr double kRunningMomentum = 0.9;
inline constexpr double kProbabilityFloor = 1e-12;
inline constexpr double kPreluInitialSlope = 0.25;

// ---- convolution -----------------------------------------------------------

/// x: [B,T,Cin], w: [Cout,l,Cin], b: [Cout]. Stride 1. Same padding zero-pads
/// floor((l-1)/2) on the left and ceil((l-1)/2) on the right.
Tensor conv1d_forward(const Tensor& x, const Tensor& w, const Tensor& b, Padding padding);

struct Conv1dGrads {
  Tensor x, w, b;
};
Conv1dGrads conv1d_backward(const Tensor& grad_out, const Tensor& x, const Tensor& w, Padding padding,
                            bool need_grad_x = true);

std::size_t conv1d_output_length(std::size_t length, std::size_t filter_length, Padding padding);

// ---- dense ------------------------------------------------------------------

/// x: [B,Fin], w: [Fin,Fout], b: [Fout].
Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor& b);

struct DenseGrads {
  Tensor x, w, b;
};
DenseGrads dense_backward(const Tensor& grad_out, const Tensor& x, const Tensor& w, bool need_grad_x = true);

// ---- normalization ----------------------------------------------------------

struct NormCache {
  Tensor x_hat;
  std::vector<double> inv_std;  // per normalized slice
};

struct NormGrads {
  Tensor x, gamma, beta;
};

struct RunningStats {
  Tensor mean, var;
};

/// Normalizes each channel over (batch, time). Updates `running` (when given)
/// with momentum kRunningMomentum; the running variance uses the unbiased estimate.
Tensor batch_norm_train(const Tensor& x, const Tensor& gamma, const Tensor& beta, RunningStats* running,
                        NormCache* cache);
Tensor batch_norm_infer(const Tensor& x, const Tensor& gamma, const Tensor& beta, const RunningStats& running);
NormGrads batch_norm_backward(const Tensor& grad_out, const NormCache& cache, const Tensor& gamma);

/// Normalizes each (instance, channel) slice over time, then applies the
/// per-channel affine transform.
Tensor instance_norm_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta, NormCache* cache);
NormGrads instance_norm_backward(const Tensor& grad_out, const NormCache& cache, const Tensor& gamma);

// ---- activations ------------------------------------------------------------

/// Softmax runs over the last axis.
Tensor activation_forward(const Tensor& x, Activation kind);
/// Gradient from the forward *output* `y`.
Tensor activation_backward(const Tensor& grad_out, const Tensor& y, Activation kind);

/// One slope per channel (last axis).
Tensor prelu_forward(const Tensor& x, const Tensor& slopes);
struct PreluGrads {
  Tensor x, slopes;
};
PreluGrads prelu_backward(const Tensor& grad_out, const Tensor& x, const Tensor& slopes);

// ---- dropout ----------------------------------------------------------------

/// Inverted dropout. In train mode `rng` is required and the applied scale
/// mask (0 or 1/(1-rate)) is written to `mask` when given.
Tensor dropout_forward(const Tensor& x, double rate, Mode mode, Rng* rng, Tensor* mask);
Tensor dropout_backward(const Tensor& grad_out, const Tensor& mask);

// ---- pooling ----------------------------------------------------------------

/// Non-overlapping windows (stride = window); the trailing remainder is
/// dropped. `max_windows` > 0 additionally caps the number of windows.
Tensor pool1d_forward(const Tensor& x, std::size_t window, PoolKind kind, std::vector<std::size_t>* argmax,
                      std::size_t max_windows = 0);
Tensor pool1d_backward(const Tensor& grad_out, const Shape& input_shape, std::size_t window, PoolKind kind,
                       const std::vector<std::size_t>& argmax);

/// Global average pooling over time: [B,T,C] -> [B,C].
Tensor gap_forward(const Tensor& x);
Tensor gap_backward(const Tensor& grad_out, std::size_t length);

// ---- attention ----------------------------------------------------------------

/// x: [B,T,2H]. The first H channels are attention logits (softmax over
/// time, per channel), the last H are values. Output [B,H].
Tensor attention_forward(const Tensor& x, Tensor* weights);
Tensor attention_backward(const Tensor& grad_out, const Tensor& x, const Tensor& weights);

// ---- residual ---------------------------------------------------------------

Tensor residual_add(const Tensor& x, const Tensor& y);
struct ResidualGrads {
  Tensor x, y;
};
ResidualGrads residual_add_backward(const Tensor& grad_out);

// ---- loss -------------------------------------------------------------------

struct LossValue {
  double value = 0.0;
  Tensor grad;  // d loss / d pred
};

/// pred, target: [N,K]; target rows must be one-hot. Both losses average over N.
LossValue loss(const Tensor& pred, const Tensor& target, LossKind kind);

}  // namespace tsc::layers
