#include <stdexcept>

#include "../tensor/gemm.hpp"
#include "tsc/error.hpp"
#include "tsc/layers.hpp"

namespace tsc::layers {

namespace {

struct ConvGeometry {
  std::size_t batch, length, in_channels, out_channels, filter, pad_left, pad_right, out_length;
};

ConvGeometry geometry(const Tensor& x, const Tensor& w, Padding padding) {
  if (x.rank() != 3 || w.rank() != 3 || x.dim(2) != w.dim(2)) {
    throw ShapeError("conv1d: input " + to_string(x.shape()) + " incompatible with filters " +
                     to_string(w.shape()));
  }
  ConvGeometry g{};
  g.batch = x.dim(0);
  g.length = x.dim(1);
  g.in_channels = x.dim(2);
  g.out_channels = w.dim(0);
  g.filter = w.dim(1);
  if (padding == Padding::same) {
    g.pad_left = (g.filter - 1) / 2;
    g.pad_right = g.filter - 1 - g.pad_left;
  }
  g.out_length = conv1d_output_length(g.length, g.filter, padding);
  return g;
}

// Zero-padded copy [B, T + pads, C]. Each output step then reads a contiguous
// window of filter*C values, so the convolution is one strided GEMM per sample.
Tensor pad_time(const Tensor& x, std::size_t left, std::size_t right) {
  const std::size_t b = x.dim(0), t = x.dim(1), c = x.dim(2);
  Tensor out(Shape{b, t + left + right, c});
  for (std::size_t i = 0; i < b; ++i) {
    const double* src = x.data() + i * t * c;
    double* dst = out.data() + (i * (t + left + right) + left) * c;
    std::copy(src, src + t * c, dst);
  }
  return out;
}

}  // namespace

std::size_t conv1d_output_length(std::size_t length, std::size_t filter_length, Padding padding) {
  if (filter_length == 0) throw std::invalid_argument("conv1d: filter length must be >= 1");
  if (padding == Padding::same) return length;
  if (filter_length > length) {
    throw std::invalid_argument("conv1d: filter length " + std::to_string(filter_length) +
                                " exceeds series length " + std::to_string(length) + " with valid padding");
  }
  return length - filter_length + 1;
}

Tensor conv1d_forward(const Tensor& x, const Tensor& w, const Tensor& b, Padding padding) {
  const auto g = geometry(x, w, padding);
  if (b.size() != g.out_channels) {
    throw ShapeError("conv1d: bias " + to_string(b.shape()) + " does not match filters " + to_string(w.shape()));
  }
  const bool padded = g.pad_left + g.pad_right > 0;
  Tensor tmp;
  if (padded) tmp = pad_time(x, g.pad_left, g.pad_right);
  const Tensor& src = padded ? tmp : x;
  const std::size_t src_len = g.length + g.pad_left + g.pad_right;
  const std::size_t window = g.filter * g.in_channels;

  Tensor out(Shape{g.batch, g.out_length, g.out_channels});
  for (std::size_t i = 0; i < g.batch; ++i) {
    double* y = out.data() + i * g.out_length * g.out_channels;
    for (std::size_t t = 0; t < g.out_length; ++t) {
      std::copy(b.data(), b.data() + g.out_channels, y + t * g.out_channels);
    }
    detail::gemm({src.data() + i * src_len * g.in_channels, g.out_length, window, g.in_channels},
                 {w.data(), g.out_channels, window, window, true}, y, g.out_channels, true);
  }
  return out;
}

Conv1dGrads conv1d_backward(const Tensor& grad_out, const Tensor& x, const Tensor& w, Padding padding,
                            bool need_grad_x) {
  const auto g = geometry(x, w, padding);
  if (grad_out.shape() != Shape{g.batch, g.out_length, g.out_channels}) {
    throw ShapeError("conv1d_backward: gradient " + to_string(grad_out.shape()) + " does not match output " +
                     to_string(Shape{g.batch, g.out_length, g.out_channels}));
  }
  const bool padded = g.pad_left + g.pad_right > 0;
  Tensor tmp;
  if (padded) tmp = pad_time(x, g.pad_left, g.pad_right);
  const Tensor& src = padded ? tmp : x;
  const std::size_t src_len = g.length + g.pad_left + g.pad_right;
  const std::size_t window = g.filter * g.in_channels;

  Conv1dGrads grads{Tensor(x.shape()), Tensor(w.shape()), Tensor(Shape{g.out_channels})};
  for (std::size_t i = 0; i < g.batch; ++i) {
    const double* go = grad_out.data() + i * g.out_length * g.out_channels;
    for (std::size_t t = 0; t < g.out_length; ++t)
      for (std::size_t o = 0; o < g.out_channels; ++o) grads.b[o] += go[t * g.out_channels + o];
    // dW[Cout, l*Cin] += G^T [Cout, T'] * windows [T', l*Cin]
    detail::gemm({go, g.out_length, g.out_channels, g.out_channels, true},
                 {src.data() + i * src_len * g.in_channels, g.out_length, window, g.in_channels}, grads.w.data(),
                 window, true);
  }
  if (!need_grad_x) {
    grads.x = Tensor();
    return grads;
  }

  // dP[s] = sum_j G[s - j] W[:, j, :]. Padding G by l-1 on both sides turns this
  // into a correlation with the time-flipped, transposed filter bank.
  const std::size_t l = g.filter;
  Tensor flipped(Shape{l * g.out_channels, g.in_channels});
  for (std::size_t j = 0; j < l; ++j)
    for (std::size_t o = 0; o < g.out_channels; ++o)
      for (std::size_t c = 0; c < g.in_channels; ++c)
        flipped[(j * g.out_channels + o) * g.in_channels + c] = w[(o * l + (l - 1 - j)) * g.in_channels + c];

  const Tensor gpad = pad_time(grad_out, l - 1, l - 1);
  const std::size_t gpad_len = g.out_length + 2 * (l - 1);
  Tensor dpad(Shape{src_len, g.in_channels});
  for (std::size_t i = 0; i < g.batch; ++i) {
    detail::gemm({gpad.data() + i * gpad_len * g.out_channels, src_len, l * g.out_channels, g.out_channels},
                 {flipped.data(), l * g.out_channels, g.in_channels, g.in_channels}, dpad.data(), g.in_channels,
                 false);
    const double* from = dpad.data() + g.pad_left * g.in_channels;
    std::copy(from, from + g.length * g.in_channels, grads.x.data() + i * g.length * g.in_channels);
  }
  return grads;
}

}  // namespace tsc::layers
