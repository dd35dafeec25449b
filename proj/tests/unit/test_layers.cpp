#include <gtest/gtest.h>

#include <cmath>

#include "numeric.hpp"
#include "tsc/error.hpp"
#include "tsc/layers.hpp"

using namespace tsc;
using namespace tsc::layers;
using tsc::check::dot;
using tsc::check::gradient_error;
using tsc::check::random_tensor;

namespace {

// Shifted dot products, zero outside [0, T).
Tensor naive_conv(const Tensor& x, const Tensor& w, const Tensor& b, Padding padding) {
  const std::size_t B = x.dim(0), T = x.dim(1), C = x.dim(2), O = w.dim(0), l = w.dim(1);
  const long left = padding == Padding::same ? long(l - 1) / 2 : 0;
  const std::size_t out_t = padding == Padding::same ? T : T - l + 1;
  Tensor y(Shape{B, out_t, O});
  for (std::size_t i = 0; i < B; ++i)
    for (std::size_t t = 0; t < out_t; ++t)
      for (std::size_t o = 0; o < O; ++o) {
        double s = b[o];
        for (std::size_t j = 0; j < l; ++j) {
          const long src = long(t) + long(j) - left;
          if (src < 0 || src >= long(T)) continue;
          for (std::size_t c = 0; c < C; ++c) s += w.at(o, j, c) * x.at(i, std::size_t(src), c);
        }
        y.at(i, t, o) = s;
      }
  return y;
}

Tensor one_hot_rows(std::size_t n, std::size_t k, Rng& rng) {
  Tensor y(Shape{n, k});
  for (std::size_t i = 0; i < n; ++i) y.at(i, rng.below(k)) = 1.0;
  return y;
}

}  // namespace

// ---- convolution ---------------------------------------------------------------

TEST(Conv1d, MovingAverageFilter) {
  const Tensor x(Shape{1, 5, 1}, std::vector<double>{3, 6, 9, 12, 15});
  const Tensor w(Shape{1, 3, 1}, 1.0 / 3.0);
  const auto y = conv1d_forward(x, w, Tensor(Shape{1}), Padding::same);
  const double expect[] = {3, 6, 9, 12, 9};
  for (int t = 0; t < 5; ++t) EXPECT_NEAR(y[t], expect[t], 1e-12);
}

TEST(Conv1d, UnitFilterIsIdentity) {
  Rng rng(1);
  const auto x = random_tensor({2, 7, 1}, rng);
  EXPECT_EQ(conv1d_forward(x, Tensor(Shape{1, 1, 1}, 1.0), Tensor(Shape{1}), Padding::same), x);
}

TEST(Conv1d, MatchesNaiveOracle) {
  Rng rng(2);
  for (auto padding : {Padding::same, Padding::valid}) {
    for (std::size_t l : {1, 2, 5, 8}) {
      const auto x = random_tensor({3, 11, 2}, rng);
      const auto w = random_tensor({4, l, 2}, rng);
      const auto b = random_tensor({4}, rng);
      EXPECT_LT(max_abs_diff(conv1d_forward(x, w, b, padding), naive_conv(x, w, b, padding)), 1e-12);
    }
  }
}

TEST(Conv1d, SamePaddingPreservesLength) {
  Rng rng(3);
  for (std::size_t l : {3, 5, 8, 11, 21}) {
    const auto x = random_tensor({1, 30, 2}, rng);
    EXPECT_EQ(conv1d_forward(x, random_tensor({3, l, 2}, rng), Tensor(Shape{3}), Padding::same).dim(1), 30u);
  }
}

TEST(Conv1d, ValidFilterLongerThanSeriesRejected) {
  const Tensor x(Shape{1, 4, 1});
  EXPECT_THROW(conv1d_forward(x, Tensor(Shape{1, 5, 1}), Tensor(Shape{1}), Padding::valid), std::invalid_argument);
  EXPECT_THROW(conv1d_forward(x, Tensor(Shape{1, 3, 2}), Tensor(Shape{1}), Padding::valid), ShapeError);
}

TEST(Conv1d, ZeroUpstreamGivesZeroGradients) {
  Rng rng(4);
  const auto x = random_tensor({2, 9, 3}, rng);
  const auto w = random_tensor({2, 3, 3}, rng);
  const auto g = conv1d_backward(Tensor(Shape{2, 9, 2}), x, w, Padding::same);
  EXPECT_EQ(frobenius_norm(g.x) + frobenius_norm(g.w) + frobenius_norm(g.b), 0.0);
}

TEST(Conv1d, SumLossWithUnitFilterGivesUnitGradient) {
  Rng rng(5);
  const auto x = random_tensor({2, 6, 1}, rng);
  const auto g = conv1d_backward(Tensor(Shape{2, 6, 1}, 1.0), x, Tensor(Shape{1, 1, 1}, 1.0), Padding::same);
  for (double v : g.x.values()) EXPECT_EQ(v, 1.0);
  EXPECT_EQ(g.b[0], 12.0);
}

TEST(Conv1d, FiniteDifferenceGradients) {
  Rng rng(6);
  for (auto padding : {Padding::same, Padding::valid}) {
    for (std::size_t l : {1, 4, 5}) {
      auto x = random_tensor({2, 9, 3}, rng);
      auto w = random_tensor({2, l, 3}, rng);
      auto b = random_tensor({2}, rng);
      const auto r = random_tensor(conv1d_forward(x, w, b, padding).shape(), rng);
      const auto f = [&] { return dot(r, conv1d_forward(x, w, b, padding)); };
      const auto g = conv1d_backward(r, x, w, padding);
      EXPECT_LT(gradient_error(x, g.x, f), 1e-6);
      EXPECT_LT(gradient_error(w, g.w, f), 1e-6);
      EXPECT_LT(gradient_error(b, g.b, f), 1e-6);
    }
  }
}

TEST(Conv1d, GradXCanBeSkipped) {
  Rng rng(7);
  const auto x = random_tensor({1, 5, 1}, rng);
  const auto g = conv1d_backward(Tensor(Shape{1, 5, 1}, 1.0), x, Tensor(Shape{1, 3, 1}, 1.0), Padding::same, false);
  EXPECT_TRUE(g.x.empty());
  EXPECT_FALSE(g.w.empty());
}

// ---- dense -------------------------------------------------------------------------

TEST(Dense, IdentityWeights) {
  Rng rng(8);
  const auto x = random_tensor({3, 4}, rng);
  Tensor id(Shape{4, 4});
  for (std::size_t i = 0; i < 4; ++i) id.at(i, i) = 1.0;
  EXPECT_EQ(dense_forward(x, id, Tensor(Shape{4})), x);
}

TEST(Dense, OneHotSelectsRow) {
  Rng rng(9);
  const auto w = random_tensor({3, 2}, rng);
  const auto b = random_tensor({2}, rng);
  const auto y = dense_forward(Tensor::matrix(1, 3, {0, 1, 0}), w, b);
  EXPECT_DOUBLE_EQ(y[0], w.at(1, 0) + b[0]);
  EXPECT_DOUBLE_EQ(y[1], w.at(1, 1) + b[1]);
}

TEST(Dense, FiniteDifferenceGradients) {
  Rng rng(10);
  auto x = random_tensor({4, 5}, rng);
  auto w = random_tensor({5, 3}, rng);
  auto b = random_tensor({3}, rng);
  const auto r = random_tensor({4, 3}, rng);
  const auto f = [&] { return dot(r, dense_forward(x, w, b)); };
  const auto g = dense_backward(r, x, w);
  EXPECT_LT(gradient_error(x, g.x, f), 1e-6);
  EXPECT_LT(gradient_error(w, g.w, f), 1e-6);
  EXPECT_LT(gradient_error(b, g.b, f), 1e-6);
  EXPECT_THROW(dense_forward(x, random_tensor({4, 3}, rng), b), ShapeError);
}

// ---- batch norm ---------------------------------------------------------------------

TEST(BatchNorm, TrainOutputIsStandardized) {
  Rng rng(11);
  // Spread well above epsilon so the epsilon bias on the variance stays below 1e-6.
  const auto x = random_tensor({6, 20, 3}, rng, -40.0, 40.0);
  const auto y = batch_norm_train(x, Tensor(Shape{3}, 1.0), Tensor(Shape{3}), nullptr, nullptr);
  for (std::size_t c = 0; c < 3; ++c) {
    double m = 0, v = 0;
    for (std::size_t i = 0; i < 120; ++i) m += y[i * 3 + c];
    m /= 120;
    for (std::size_t i = 0; i < 120; ++i) v += (y[i * 3 + c] - m) * (y[i * 3 + c] - m);
    v /= 120;
    EXPECT_LT(std::abs(m), 1e-9);
    EXPECT_LT(std::abs(v - 1.0), 1e-6);
  }
}

TEST(BatchNorm, ConstantChannelMapsToShift) {
  const Tensor x(Shape{2, 4, 1}, 3.5);
  const auto y = batch_norm_train(x, Tensor(Shape{1}, 2.0), Tensor(Shape{1}, 0.7), nullptr, nullptr);
  for (double v : y.values()) EXPECT_DOUBLE_EQ(v, 0.7);
}

TEST(BatchNorm, SingleValuePerChannelIsDegenerate) {
  EXPECT_THROW(batch_norm_train(Tensor(Shape{1, 1, 2}), Tensor(Shape{2}, 1.0), Tensor(Shape{2}), nullptr, nullptr),
               DegenerateError);
}

TEST(BatchNorm, RunningStatisticsUpdate) {
  const Tensor x(Shape{1, 4, 1}, std::vector<double>{1, 2, 3, 4});
  RunningStats rs{Tensor(Shape{1}), Tensor(Shape{1}, 1.0)};
  batch_norm_train(x, Tensor(Shape{1}, 1.0), Tensor(Shape{1}), &rs, nullptr);
  EXPECT_NEAR(rs.mean[0], 0.1 * 2.5, 1e-15);
  // unbiased batch variance of {1,2,3,4} is 5/3
  EXPECT_NEAR(rs.var[0], 0.9 + 0.1 * 5.0 / 3.0, 1e-15);
  const auto y = batch_norm_infer(x, Tensor(Shape{1}, 1.0), Tensor(Shape{1}), rs);
  EXPECT_NEAR(y[0], (1 - rs.mean[0]) / std::sqrt(rs.var[0] + kNormEpsilon), 1e-15);
  EXPECT_GE(rs.var[0], 0.0);
}

TEST(BatchNorm, FiniteDifferenceGradients) {
  Rng rng(12);
  auto x = random_tensor({3, 5, 2}, rng);
  auto gamma = random_tensor({2}, rng, 0.5, 1.5);
  auto beta = random_tensor({2}, rng);
  const auto r = random_tensor({3, 5, 2}, rng);
  const auto f = [&] { return dot(r, batch_norm_train(x, gamma, beta, nullptr, nullptr)); };
  NormCache cache;
  batch_norm_train(x, gamma, beta, nullptr, &cache);
  const auto g = batch_norm_backward(r, cache, gamma);
  EXPECT_LT(gradient_error(x, g.x, f), 1e-5);
  EXPECT_LT(gradient_error(gamma, g.gamma, f), 1e-5);
  EXPECT_LT(gradient_error(beta, g.beta, f), 1e-5);
}

// ---- instance norm ----------------------------------------------------------------

TEST(InstanceNorm, SlicesAreCentred) {
  Rng rng(13);
  const auto x = random_tensor({3, 8, 2}, rng, -5, 5);
  const auto y = instance_norm_forward(x, Tensor(Shape{2}, 1.0), Tensor(Shape{2}), nullptr);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t c = 0; c < 2; ++c) {
      double m = 0;
      for (std::size_t t = 0; t < 8; ++t) m += y.at(i, t, c);
      EXPECT_LT(std::abs(m / 8), 1e-12);
    }
}

TEST(InstanceNorm, ScaleInvariant) {
  Rng rng(14);
  // Exact up to the epsilon term, which is negligible once the slice variance is large.
  const auto x = random_tensor({1, 10, 2}, rng, -300, 300);
  const Tensor gamma(Shape{2}, 1.0), beta(Shape{2});
  EXPECT_LT(max_abs_diff(instance_norm_forward(x, gamma, beta, nullptr),
                         instance_norm_forward(scale(x, 10.0), gamma, beta, nullptr)),
            1e-9);
}

TEST(InstanceNorm, SingleStepIsDegenerate) {
  EXPECT_THROW(instance_norm_forward(Tensor(Shape{4, 1, 1}), Tensor(Shape{1}, 1.0), Tensor(Shape{1}), nullptr),
               DegenerateError);
}

TEST(InstanceNorm, FiniteDifferenceGradients) {
  Rng rng(15);
  auto x = random_tensor({2, 6, 3}, rng);
  auto gamma = random_tensor({3}, rng, 0.5, 1.5);
  auto beta = random_tensor({3}, rng);
  const auto r = random_tensor({2, 6, 3}, rng);
  const auto f = [&] { return dot(r, instance_norm_forward(x, gamma, beta, nullptr)); };
  NormCache cache;
  instance_norm_forward(x, gamma, beta, &cache);
  const auto g = instance_norm_backward(r, cache, gamma);
  EXPECT_LT(gradient_error(x, g.x, f), 1e-5);
  EXPECT_LT(gradient_error(gamma, g.gamma, f), 1e-5);
  EXPECT_LT(gradient_error(beta, g.beta, f), 1e-5);
}

// ---- activations ----------------------------------------------------------------

TEST(Activation, SoftmaxOfZerosIsUniform) {
  const auto y = activation_forward(Tensor(Shape{1, 4}), Activation::softmax);
  for (double v : y.values()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Activation, SoftmaxRowsSumToOne) {
  Rng rng(16);
  const auto y = activation_forward(random_tensor({50, 7}, rng, -100, 100), Activation::softmax);
  for (std::size_t i = 0; i < 50; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < 7; ++j) s += y.at(i, j);
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  EXPECT_TRUE(y.all_finite());
}

TEST(Activation, PreluWithZeroSlopeIsRelu) {
  Rng rng(17);
  const auto x = random_tensor({3, 4, 2}, rng);
  EXPECT_EQ(prelu_forward(x, Tensor(Shape{2})), activation_forward(x, Activation::relu));
}

TEST(Activation, FiniteDifferenceGradients) {
  Rng rng(18);
  for (auto kind : {Activation::linear, Activation::relu, Activation::sigmoid, Activation::tanh,
                    Activation::softmax}) {
    auto x = random_tensor({3, 5}, rng, -2, 2);
    const auto r = random_tensor({3, 5}, rng);
    const auto f = [&] { return dot(r, activation_forward(x, kind)); };
    const auto g = activation_backward(r, activation_forward(x, kind), kind);
    EXPECT_LT(gradient_error(x, g, f), 1e-6) << int(kind);
  }
}

TEST(Activation, PreluFiniteDifferenceGradients) {
  Rng rng(19);
  auto x = random_tensor({2, 6, 3}, rng, -2, 2);
  auto slopes = Tensor(Shape{3}, kPreluInitialSlope);
  const auto r = random_tensor({2, 6, 3}, rng);
  const auto f = [&] { return dot(r, prelu_forward(x, slopes)); };
  const auto g = prelu_backward(r, x, slopes);
  EXPECT_LT(gradient_error(x, g.x, f), 1e-6);
  EXPECT_LT(gradient_error(slopes, g.slopes, f), 1e-6);
}

// ---- dropout ----------------------------------------------------------------------

TEST(Dropout, RateZeroAndInferAreIdentity) {
  Rng rng(20);
  const auto x = random_tensor({4, 4}, rng);
  EXPECT_EQ(dropout_forward(x, 0.0, Mode::train, &rng, nullptr), x);
  EXPECT_EQ(dropout_forward(x, 0.0, Mode::infer, nullptr, nullptr), x);
  EXPECT_EQ(dropout_forward(x, 0.7, Mode::infer, nullptr, nullptr), x);
}

TEST(Dropout, RateOneRejected) {
  const Tensor x(Shape{2});
  Rng rng(1);
  EXPECT_THROW(dropout_forward(x, 1.0, Mode::train, &rng, nullptr), std::invalid_argument);
  EXPECT_THROW(dropout_forward(x, 0.5, Mode::train, nullptr, nullptr), std::invalid_argument);
}

TEST(Dropout, SurvivorFractionAndMean) {
  Rng rng(21);
  const Tensor x(Shape{1000000}, 1.0);
  Tensor mask;
  const auto y = dropout_forward(x, 0.5, Mode::train, &rng, &mask);
  std::size_t alive = 0;
  for (double v : y.values()) alive += v != 0.0;
  EXPECT_NEAR(double(alive) / 1e6, 0.5, 0.01);
  EXPECT_NEAR(sum(y) / 1e6, 1.0, 0.02);
  EXPECT_EQ(dropout_backward(Tensor(Shape{1000000}, 1.0), mask), y);
}

// ---- pooling ----------------------------------------------------------------------

TEST(Pool, MaxWindowTwo) {
  const Tensor x(Shape{1, 4, 1}, std::vector<double>{1, 3, 2, 5});
  EXPECT_EQ(pool1d_forward(x, 2, PoolKind::max, nullptr), Tensor(Shape{1, 2, 1}, std::vector<double>{3, 5}));
}

TEST(Pool, AvgOfConstant) {
  const Tensor x(Shape{1, 9, 1}, 4.25);
  EXPECT_EQ(pool1d_forward(x, 3, PoolKind::avg, nullptr), Tensor(Shape{1, 3, 1}, 4.25));
}

TEST(Pool, RemainderDroppedAndCap) {
  const Tensor x(Shape{1, 10, 2});
  EXPECT_EQ(pool1d_forward(x, 3, PoolKind::avg, nullptr).dim(1), 3u);
  EXPECT_EQ(pool1d_forward(x, 3, PoolKind::avg, nullptr, 2).dim(1), 2u);
  EXPECT_THROW(pool1d_forward(x, 11, PoolKind::max, nullptr), std::invalid_argument);
}

TEST(Pool, MaxTieRoutesToFirstIndex) {
  const Tensor x(Shape{1, 3, 1}, 2.0);
  std::vector<std::size_t> argmax;
  pool1d_forward(x, 3, PoolKind::max, &argmax);
  const auto g = pool1d_backward(Tensor(Shape{1, 1, 1}, 1.0), x.shape(), 3, PoolKind::max, argmax);
  EXPECT_EQ(g, Tensor(Shape{1, 3, 1}, std::vector<double>{1, 0, 0}));
}

TEST(Pool, FiniteDifferenceGradients) {
  Rng rng(22);
  for (auto kind : {PoolKind::max, PoolKind::avg}) {
    auto x = random_tensor({2, 11, 3}, rng);
    const auto r = random_tensor({2, 3, 3}, rng);
    const auto f = [&] { return dot(r, pool1d_forward(x, 3, kind, nullptr)); };
    std::vector<std::size_t> argmax;
    pool1d_forward(x, 3, kind, &argmax);
    EXPECT_LT(gradient_error(x, pool1d_backward(r, x.shape(), 3, kind, argmax), f), 1e-6);
  }
}

TEST(Gap, SqueezeAndConstant) {
  Rng rng(23);
  const auto x = random_tensor({2, 1, 3}, rng);
  EXPECT_EQ(gap_forward(x), x.reshaped({2, 3}));
  EXPECT_EQ(gap_forward(Tensor(Shape{1, 6, 2}, 1.5)), Tensor(Shape{1, 2}, 1.5));
}

TEST(Gap, FiniteDifferenceGradients) {
  Rng rng(24);
  auto x = random_tensor({2, 7, 3}, rng);
  const auto r = random_tensor({2, 3}, rng);
  const auto f = [&] { return dot(r, gap_forward(x)); };
  EXPECT_LT(gradient_error(x, gap_backward(r, 7), f), 1e-8);
}

// ---- attention --------------------------------------------------------------------

TEST(Attention, ConstantLogitsAverageValues) {
  Rng rng(25);
  auto x = random_tensor({2, 5, 4}, rng);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t t = 0; t < 5; ++t)
      for (std::size_t c = 0; c < 2; ++c) x.at(i, t, c) = 0.3;
  const auto y = attention_forward(x, nullptr);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t h = 0; h < 2; ++h) {
      double m = 0;
      for (std::size_t t = 0; t < 5; ++t) m += x.at(i, t, 2 + h) / 5;
      EXPECT_NEAR(y.at(i, h), m, 1e-12);
    }
}

TEST(Attention, DominantLogitSelectsStep) {
  Rng rng(26);
  auto x = random_tensor({1, 6, 2}, rng);
  x.at(0, 4, 0) = 1000.0;
  EXPECT_NEAR(attention_forward(x, nullptr)[0], x.at(0, 4, 1), 1e-9);
}

TEST(Attention, OddChannelsRejected) {
  EXPECT_THROW(attention_forward(Tensor(Shape{1, 3, 3}), nullptr), std::invalid_argument);
}

TEST(Attention, FiniteDifferenceGradients) {
  Rng rng(27);
  auto x = random_tensor({2, 6, 6}, rng, -2, 2);
  const auto r = random_tensor({2, 3}, rng);
  const auto f = [&] { return dot(r, attention_forward(x, nullptr)); };
  Tensor weights;
  attention_forward(x, &weights);
  EXPECT_LT(gradient_error(x, attention_backward(r, x, weights), f), 1e-5);
}

// ---- residual ---------------------------------------------------------------------

TEST(Residual, ZeroBranchIsIdentityAndGradientsPassThrough) {
  Rng rng(28);
  const auto x = random_tensor({2, 3, 4}, rng);
  EXPECT_EQ(residual_add(x, Tensor(x.shape())), x);
  const auto g = residual_add_backward(x);
  EXPECT_EQ(g.x, x);
  EXPECT_EQ(g.y, x);
  EXPECT_THROW(residual_add(x, Tensor(Shape{2, 3, 3})), ShapeError);
}

TEST(Residual, ComposedBlockGradient) {
  // y = relu(conv(x)) + x
  Rng rng(29);
  auto x = random_tensor({2, 8, 3}, rng);
  auto w = random_tensor({3, 3, 3}, rng);
  const Tensor b(Shape{3});
  const auto r = random_tensor({2, 8, 3}, rng);
  const auto forward = [&] {
    return residual_add(activation_forward(conv1d_forward(x, w, b, Padding::same), Activation::relu), x);
  };
  const auto f = [&] { return dot(r, forward()); };
  const auto h = activation_forward(conv1d_forward(x, w, b, Padding::same), Activation::relu);
  const auto split = residual_add_backward(r);
  const auto conv = conv1d_backward(activation_backward(split.x, h, Activation::relu), x, w, Padding::same);
  const auto gx = add(conv.x, split.y);
  EXPECT_LT(gradient_error(x, gx, f), 1e-6);
  EXPECT_LT(gradient_error(w, conv.w, f), 1e-6);
}

// ---- loss ---------------------------------------------------------------------------

TEST(Loss, PerfectPrediction) {
  const auto y = Tensor::matrix(2, 3, {0, 1, 0, 1, 0, 0});
  EXPECT_LE(loss(y, y, LossKind::cross_entropy).value, 1e-12 * 3);
  EXPECT_EQ(loss(y, y, LossKind::mse).value, 0.0);
}

TEST(Loss, UniformPredictionGivesLogK) {
  const Tensor p(Shape{3, 4}, 0.25);
  Rng rng(30);
  EXPECT_NEAR(loss(p, one_hot_rows(3, 4, rng), LossKind::cross_entropy).value, std::log(4.0), 1e-12);
}

TEST(Loss, NonOneHotRejected) {
  const Tensor p(Shape{1, 2}, 0.5);
  EXPECT_THROW(loss(p, Tensor::matrix(1, 2, {0.5, 0.5}), LossKind::mse), std::invalid_argument);
  EXPECT_THROW(loss(p, Tensor::matrix(1, 2, {1, 1}), LossKind::cross_entropy), std::invalid_argument);
}

TEST(Loss, ComposedGradients) {
  Rng rng(31);
  auto z = random_tensor({4, 3}, rng, -2, 2);
  const auto y = one_hot_rows(4, 3, rng);
  {
    const auto f = [&] { return loss(activation_forward(z, Activation::softmax), y, LossKind::cross_entropy).value; };
    const auto p = activation_forward(z, Activation::softmax);
    const auto g = activation_backward(loss(p, y, LossKind::cross_entropy).grad, p, Activation::softmax);
    EXPECT_LT(gradient_error(z, g, f), 1e-6);
  }
  {
    const auto f = [&] { return loss(activation_forward(z, Activation::sigmoid), y, LossKind::mse).value; };
    const auto p = activation_forward(z, Activation::sigmoid);
    const auto g = activation_backward(loss(p, y, LossKind::mse).grad, p, Activation::sigmoid);
    EXPECT_LT(gradient_error(z, g, f), 1e-6);
  }
}
