#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "../tensor/gemm.hpp"
#include "tsc/error.hpp"
#include "tsc/layers.hpp"

namespace tsc::layers {

namespace {

void require_rank3(const Tensor& x, const char* op) {
  if (x.rank() != 3) throw ShapeError(std::string(op) + ": expected [batch,time,channels], got " + to_string(x.shape()));
}

void require_channels(const Tensor& p, std::size_t channels, const char* op, const char* what) {
  if (p.size() != channels) {
    throw ShapeError(std::string(op) + ": " + what + " " + to_string(p.shape()) + " does not match " +
                     std::to_string(channels) + " channels");
  }
}

double sigmoid(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

// ---- dense ------------------------------------------------------------------

Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(0) || b.size() != w.dim(1)) {
    throw ShapeError("dense: input " + to_string(x.shape()) + " incompatible with weights " + to_string(w.shape()) +
                     " and bias " + to_string(b.shape()));
  }
  const std::size_t n = x.dim(0), out = w.dim(1);
  Tensor y(Shape{n, out});
  for (std::size_t i = 0; i < n; ++i) std::copy(b.data(), b.data() + out, y.data() + i * out);
  detail::gemm({x.data(), n, x.dim(1), x.dim(1)}, {w.data(), w.dim(0), out, out}, y.data(), out, true);
  return y;
}

DenseGrads dense_backward(const Tensor& grad_out, const Tensor& x, const Tensor& w, bool need_grad_x) {
  if (grad_out.rank() != 2 || grad_out.dim(0) != x.dim(0) || grad_out.dim(1) != w.dim(1)) {
    throw ShapeError("dense_backward: gradient " + to_string(grad_out.shape()) + " incompatible with input " +
                     to_string(x.shape()) + " and weights " + to_string(w.shape()));
  }
  DenseGrads g{Tensor(), matmul(x, grad_out, true, false), sum_over_axis(grad_out, 0)};
  if (need_grad_x) g.x = matmul(grad_out, w, false, true);
  return g;
}

// ---- normalization ------------------------------------------------------------

Tensor batch_norm_train(const Tensor& x, const Tensor& gamma, const Tensor& beta, RunningStats* running,
                        NormCache* cache) {
  require_rank3(x, "batch_norm");
  const std::size_t c = x.dim(2), n = x.dim(0) * x.dim(1);
  require_channels(gamma, c, "batch_norm", "scale");
  require_channels(beta, c, "batch_norm", "shift");
  if (n < 2) throw DegenerateError("batch_norm: train mode needs at least two values per channel");

  std::vector<double> mean(c, 0.0), var(c, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < c; ++k) mean[k] += x[i * c + k];
  for (auto& m : mean) m /= double(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < c; ++k) {
      const double d = x[i * c + k] - mean[k];
      var[k] += d * d;
    }
  for (auto& v : var) v /= double(n);

  std::vector<double> inv_std(c);
  for (std::size_t k = 0; k < c; ++k) inv_std[k] = 1.0 / std::sqrt(var[k] + kNormEpsilon);

  Tensor y(x.shape());
  Tensor x_hat(x.shape());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < c; ++k) {
      const double h = (x[i * c + k] - mean[k]) * inv_std[k];
      x_hat[i * c + k] = h;
      y[i * c + k] = gamma[k] * h + beta[k];
    }

  if (running) {
    const double unbiased = double(n) / double(n - 1);
    for (std::size_t k = 0; k < c; ++k) {
      running->mean[k] = kRunningMomentum * running->mean[k] + (1.0 - kRunningMomentum) * mean[k];
      running->var[k] = kRunningMomentum * running->var[k] + (1.0 - kRunningMomentum) * var[k] * unbiased;
    }
  }
  if (cache) {
    cache->x_hat = std::move(x_hat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

Tensor batch_norm_infer(const Tensor& x, const Tensor& gamma, const Tensor& beta, const RunningStats& running) {
  require_rank3(x, "batch_norm");
  const std::size_t c = x.dim(2), n = x.dim(0) * x.dim(1);
  require_channels(gamma, c, "batch_norm", "scale");
  require_channels(running.mean, c, "batch_norm", "running mean");
  std::vector<double> a(c), s(c);
  for (std::size_t k = 0; k < c; ++k) {
    a[k] = gamma[k] / std::sqrt(running.var[k] + kNormEpsilon);
    s[k] = beta[k] - a[k] * running.mean[k];
  }
  Tensor y(x.shape());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < c; ++k) y[i * c + k] = a[k] * x[i * c + k] + s[k];
  return y;
}

NormGrads batch_norm_backward(const Tensor& grad_out, const NormCache& cache, const Tensor& gamma) {
  if (grad_out.shape() != cache.x_hat.shape()) {
    throw ShapeError("batch_norm_backward: gradient " + to_string(grad_out.shape()) + " vs cached " +
                     to_string(cache.x_hat.shape()));
  }
  const std::size_t c = grad_out.dim(2), n = grad_out.dim(0) * grad_out.dim(1);
  NormGrads g{Tensor(grad_out.shape()), Tensor(Shape{c}), Tensor(Shape{c})};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < c; ++k) {
      g.beta[k] += grad_out[i * c + k];
      g.gamma[k] += grad_out[i * c + k] * cache.x_hat[i * c + k];
    }
  const double inv_n = 1.0 / double(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < c; ++k) {
      const double dxh = grad_out[i * c + k] * gamma[k];
      const double mean_dxh = g.beta[k] * gamma[k] * inv_n;
      const double mean_dxh_xh = g.gamma[k] * gamma[k] * inv_n;
      g.x[i * c + k] = cache.inv_std[k] * (dxh - mean_dxh - cache.x_hat[i * c + k] * mean_dxh_xh);
    }
  return g;
}

Tensor instance_norm_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta, NormCache* cache) {
  require_rank3(x, "instance_norm");
  const std::size_t b = x.dim(0), t = x.dim(1), c = x.dim(2);
  require_channels(gamma, c, "instance_norm", "scale");
  require_channels(beta, c, "instance_norm", "shift");
  if (t < 2) throw DegenerateError("instance_norm: needs at least two time steps per instance");

  Tensor y(x.shape()), x_hat(x.shape());
  std::vector<double> inv_std(b * c);
  std::vector<double> mean(c), var(c);
  for (std::size_t i = 0; i < b; ++i) {
    const double* xi = x.data() + i * t * c;
    std::fill(mean.begin(), mean.end(), 0.0);
    std::fill(var.begin(), var.end(), 0.0);
    for (std::size_t s = 0; s < t; ++s)
      for (std::size_t k = 0; k < c; ++k) mean[k] += xi[s * c + k];
    for (auto& m : mean) m /= double(t);
    for (std::size_t s = 0; s < t; ++s)
      for (std::size_t k = 0; k < c; ++k) {
        const double d = xi[s * c + k] - mean[k];
        var[k] += d * d;
      }
    for (std::size_t k = 0; k < c; ++k) inv_std[i * c + k] = 1.0 / std::sqrt(var[k] / double(t) + kNormEpsilon);
    for (std::size_t s = 0; s < t; ++s)
      for (std::size_t k = 0; k < c; ++k) {
        const std::size_t idx = (i * t + s) * c + k;
        const double h = (x[idx] - mean[k]) * inv_std[i * c + k];
        x_hat[idx] = h;
        y[idx] = gamma[k] * h + beta[k];
      }
  }
  if (cache) {
    cache->x_hat = std::move(x_hat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

NormGrads instance_norm_backward(const Tensor& grad_out, const NormCache& cache, const Tensor& gamma) {
  if (grad_out.shape() != cache.x_hat.shape()) {
    throw ShapeError("instance_norm_backward: gradient " + to_string(grad_out.shape()) + " vs cached " +
                     to_string(cache.x_hat.shape()));
  }
  const std::size_t b = grad_out.dim(0), t = grad_out.dim(1), c = grad_out.dim(2);
  NormGrads g{Tensor(grad_out.shape()), Tensor(Shape{c}), Tensor(Shape{c})};
  std::vector<double> sum_g(c), sum_gx(c);
  for (std::size_t i = 0; i < b; ++i) {
    std::fill(sum_g.begin(), sum_g.end(), 0.0);
    std::fill(sum_gx.begin(), sum_gx.end(), 0.0);
    for (std::size_t s = 0; s < t; ++s)
      for (std::size_t k = 0; k < c; ++k) {
        const std::size_t idx = (i * t + s) * c + k;
        sum_g[k] += grad_out[idx];
        sum_gx[k] += grad_out[idx] * cache.x_hat[idx];
      }
    for (std::size_t k = 0; k < c; ++k) {
      g.beta[k] += sum_g[k];
      g.gamma[k] += sum_gx[k];
    }
    for (std::size_t s = 0; s < t; ++s)
      for (std::size_t k = 0; k < c; ++k) {
        const std::size_t idx = (i * t + s) * c + k;
        const double dxh = grad_out[idx] * gamma[k];
        g.x[idx] = cache.inv_std[i * c + k] *
                   (dxh - gamma[k] * (sum_g[k] + cache.x_hat[idx] * sum_gx[k]) / double(t));
      }
  }
  return g;
}

// ---- activations ----------------------------------------------------------------

Tensor activation_forward(const Tensor& x, Activation kind) {
  Tensor y(x.shape());
  switch (kind) {
    case Activation::linear:
      return x;
    case Activation::relu:
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
      return y;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = sigmoid(x[i]);
      return y;
    case Activation::tanh:
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
      return y;
    case Activation::softmax: {
      const std::size_t k = x.shape().back(), rows = x.size() / k;
      for (std::size_t r = 0; r < rows; ++r) {
        const double* in = x.data() + r * k;
        double* out = y.data() + r * k;
        const double m = *std::max_element(in, in + k);
        double z = 0.0;
        for (std::size_t j = 0; j < k; ++j) z += (out[j] = std::exp(in[j] - m));
        for (std::size_t j = 0; j < k; ++j) out[j] /= z;
      }
      return y;
    }
  }
  throw std::logic_error("unknown activation");
}

Tensor activation_backward(const Tensor& grad_out, const Tensor& y, Activation kind) {
  if (grad_out.shape() != y.shape()) {
    throw ShapeError("activation_backward: gradient " + to_string(grad_out.shape()) + " vs output " +
                     to_string(y.shape()));
  }
  Tensor g(y.shape());
  switch (kind) {
    case Activation::linear:
      return grad_out;
    case Activation::relu:
      for (std::size_t i = 0; i < y.size(); ++i) g[i] = y[i] > 0.0 ? grad_out[i] : 0.0;
      return g;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < y.size(); ++i) g[i] = grad_out[i] * y[i] * (1.0 - y[i]);
      return g;
    case Activation::tanh:
      for (std::size_t i = 0; i < y.size(); ++i) g[i] = grad_out[i] * (1.0 - y[i] * y[i]);
      return g;
    case Activation::softmax: {
      const std::size_t k = y.shape().back(), rows = y.size() / k;
      for (std::size_t r = 0; r < rows; ++r) {
        double dot = 0.0;
        for (std::size_t j = 0; j < k; ++j) dot += grad_out[r * k + j] * y[r * k + j];
        for (std::size_t j = 0; j < k; ++j) g[r * k + j] = y[r * k + j] * (grad_out[r * k + j] - dot);
      }
      return g;
    }
  }
  throw std::logic_error("unknown activation");
}

Tensor prelu_forward(const Tensor& x, const Tensor& slopes) {
  const std::size_t c = x.shape().back();
  require_channels(slopes, c, "prelu", "slopes");
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : slopes[i % c] * x[i];
  return y;
}

PreluGrads prelu_backward(const Tensor& grad_out, const Tensor& x, const Tensor& slopes) {
  if (grad_out.shape() != x.shape()) {
    throw ShapeError("prelu_backward: gradient " + to_string(grad_out.shape()) + " vs input " + to_string(x.shape()));
  }
  const std::size_t c = x.shape().back();
  PreluGrads g{Tensor(x.shape()), Tensor(slopes.shape())};
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > 0.0) {
      g.x[i] = grad_out[i];
    } else {
      g.x[i] = slopes[i % c] * grad_out[i];
      g.slopes[i % c] += x[i] * grad_out[i];
    }
  }
  return g;
}

// ---- dropout ----------------------------------------------------------------------

Tensor dropout_forward(const Tensor& x, double rate, Mode mode, Rng* rng, Tensor* mask) {
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("dropout: rate must lie in [0, 1)");
  if (mode == Mode::infer || rate == 0.0) {
    if (mask) *mask = Tensor(x.shape(), 1.0);
    return x;
  }
  if (!rng) throw std::invalid_argument("dropout: train mode requires a random generator");
  const double keep = 1.0 / (1.0 - rate);
  Tensor m(x.shape());
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    m[i] = rng->uniform() < rate ? 0.0 : keep;
    y[i] = x[i] * m[i];
  }
  if (mask) *mask = std::move(m);
  return y;
}

Tensor dropout_backward(const Tensor& grad_out, const Tensor& mask) { return mul(grad_out, mask); }

// ---- pooling ----------------------------------------------------------------------

Tensor pool1d_forward(const Tensor& x, std::size_t window, PoolKind kind, std::vector<std::size_t>* argmax,
                      std::size_t max_windows) {
  require_rank3(x, "pool1d");
  const std::size_t b = x.dim(0), t = x.dim(1), c = x.dim(2);
  if (window == 0) throw std::invalid_argument("pool1d: window must be >= 1");
  if (window > t) {
    throw std::invalid_argument("pool1d: window " + std::to_string(window) + " exceeds series length " +
                                std::to_string(t));
  }
  std::size_t out_t = t / window;
  if (max_windows > 0) out_t = std::min(out_t, max_windows);
  Tensor y(Shape{b, out_t, c});
  if (argmax && kind == PoolKind::max) argmax->assign(y.size(), 0);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t s = 0; s < out_t; ++s)
      for (std::size_t k = 0; k < c; ++k) {
        const std::size_t out_idx = (i * out_t + s) * c + k;
        if (kind == PoolKind::max) {
          std::size_t best = s * window;
          double v = x[(i * t + best) * c + k];
          for (std::size_t u = s * window + 1; u < (s + 1) * window; ++u) {
            const double cand = x[(i * t + u) * c + k];
            if (cand > v) {
              v = cand;
              best = u;
            }
          }
          y[out_idx] = v;
          if (argmax) (*argmax)[out_idx] = best;
        } else {
          double acc = 0.0;
          for (std::size_t u = s * window; u < (s + 1) * window; ++u) acc += x[(i * t + u) * c + k];
          y[out_idx] = acc / double(window);
        }
      }
  return y;
}

Tensor pool1d_backward(const Tensor& grad_out, const Shape& input_shape, std::size_t window, PoolKind kind,
                       const std::vector<std::size_t>& argmax) {
  const std::size_t b = input_shape[0], t = input_shape[1], c = input_shape[2];
  const std::size_t out_t = grad_out.dim(1);
  if (grad_out.dim(0) != b || grad_out.dim(2) != c || out_t * window > t) {
    throw ShapeError("pool1d_backward: gradient " + to_string(grad_out.shape()) + " vs input " +
                     to_string(input_shape));
  }
  Tensor g(input_shape);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t s = 0; s < out_t; ++s)
      for (std::size_t k = 0; k < c; ++k) {
        const std::size_t out_idx = (i * out_t + s) * c + k;
        if (kind == PoolKind::max) {
          g[(i * t + argmax.at(out_idx)) * c + k] += grad_out[out_idx];
        } else {
          const double share = grad_out[out_idx] / double(window);
          for (std::size_t u = s * window; u < (s + 1) * window; ++u) g[(i * t + u) * c + k] += share;
        }
      }
  return g;
}

Tensor gap_forward(const Tensor& x) {
  require_rank3(x, "gap");
  const std::size_t b = x.dim(0), t = x.dim(1), c = x.dim(2);
  Tensor y(Shape{b, c});
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t s = 0; s < t; ++s)
      for (std::size_t k = 0; k < c; ++k) y[i * c + k] += x[(i * t + s) * c + k];
  for (auto& v : y.values()) v /= double(t);
  return y;
}

Tensor gap_backward(const Tensor& grad_out, std::size_t length) {
  const std::size_t b = grad_out.dim(0), c = grad_out.dim(1);
  Tensor g(Shape{b, length, c});
  const double inv = 1.0 / double(length);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t s = 0; s < length; ++s)
      for (std::size_t k = 0; k < c; ++k) g[(i * length + s) * c + k] = grad_out[i * c + k] * inv;
  return g;
}

// ---- attention --------------------------------------------------------------------

Tensor attention_forward(const Tensor& x, Tensor* weights) {
  require_rank3(x, "attention");
  const std::size_t b = x.dim(0), t = x.dim(1), c = x.dim(2);
  if (c % 2 != 0) throw std::invalid_argument("attention: channel extent must be even, got " + std::to_string(c));
  const std::size_t h = c / 2;
  Tensor s(Shape{b, t, h});
  Tensor y(Shape{b, h});
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t k = 0; k < h; ++k) {
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t u = 0; u < t; ++u) m = std::max(m, x[(i * t + u) * c + k]);
      double z = 0.0;
      for (std::size_t u = 0; u < t; ++u) z += (s[(i * t + u) * h + k] = std::exp(x[(i * t + u) * c + k] - m));
      double acc = 0.0;
      for (std::size_t u = 0; u < t; ++u) {
        double& w = s[(i * t + u) * h + k];
        w /= z;
        acc += w * x[(i * t + u) * c + h + k];
      }
      y[i * h + k] = acc;
    }
  if (weights) *weights = std::move(s);
  return y;
}

Tensor attention_backward(const Tensor& grad_out, const Tensor& x, const Tensor& weights) {
  const std::size_t b = x.dim(0), t = x.dim(1), c = x.dim(2), h = c / 2;
  if (grad_out.shape() != Shape{b, h} || weights.shape() != Shape{b, t, h}) {
    throw ShapeError("attention_backward: gradient " + to_string(grad_out.shape()) + " vs input " +
                     to_string(x.shape()));
  }
  Tensor g(x.shape());
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t k = 0; k < h; ++k) {
      const double go = grad_out[i * h + k];
      double dot = 0.0;  // sum_u s_u * ds_u with ds_u = go * v_u
      for (std::size_t u = 0; u < t; ++u) dot += weights[(i * t + u) * h + k] * x[(i * t + u) * c + h + k];
      dot *= go;
      for (std::size_t u = 0; u < t; ++u) {
        const double w = weights[(i * t + u) * h + k];
        const double v = x[(i * t + u) * c + h + k];
        g[(i * t + u) * c + h + k] = go * w;
        g[(i * t + u) * c + k] = w * (go * v - dot);
      }
    }
  return g;
}

// ---- residual ---------------------------------------------------------------------

Tensor residual_add(const Tensor& x, const Tensor& y) {
  if (x.shape() != y.shape()) {
    throw ShapeError("residual_add: shape mismatch " + to_string(x.shape()) + " vs " + to_string(y.shape()));
  }
  return add(x, y);
}

ResidualGrads residual_add_backward(const Tensor& grad_out) { return {grad_out, grad_out}; }

// ---- loss ---------------------------------------------------------------------------

LossValue loss(const Tensor& pred, const Tensor& target, LossKind kind) {
  if (pred.rank() != 2 || pred.shape() != target.shape()) {
    throw ShapeError("loss: prediction " + to_string(pred.shape()) + " vs target " + to_string(target.shape()));
  }
  const std::size_t n = pred.dim(0), k = pred.dim(1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t ones = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const double v = target[i * k + j];
      if (v == 1.0) {
        ++ones;
      } else if (v != 0.0) {
        ones = 2;
        break;
      }
    }
    if (ones != 1) throw std::invalid_argument("loss: target row " + std::to_string(i) + " is not one-hot");
  }

  LossValue out{0.0, Tensor(pred.shape())};
  const double inv_n = 1.0 / double(n);
  if (kind == LossKind::cross_entropy) {
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (target[i] == 0.0) continue;
      const double p = std::clamp(pred[i], kProbabilityFloor, 1.0);
      out.value -= std::log(p);
      out.grad[i] = (pred[i] >= kProbabilityFloor && pred[i] <= 1.0) ? -inv_n / p : 0.0;
    }
  } else {
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double d = pred[i] - target[i];
      out.value += d * d;
      out.grad[i] = 2.0 * d * inv_n;
    }
  }
  out.value *= inv_n;
  return out;
}

}  // namespace tsc::layers
