#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>

#include "numeric.hpp"
#include "tsc/error.hpp"
#include "tsc/rng.hpp"
#include "tsc/tensor.hpp"

using namespace tsc;

namespace {

// Reference SplitMix64 written from the published algorithm.
struct SplitMixOracle {
  std::uint64_t x;
  std::uint64_t next() {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  double uniform() { return double(next() >> 11) * (1.0 / 9007199254740992.0); }
};

Tensor naive_matmul(const Tensor& a, const Tensor& b) {
  Tensor c(Shape{a.dim(0), b.dim(1)});
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < b.dim(1); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.dim(1); ++k) s += a.at(i, k) * b.at(k, j);
      c.at(i, j) = s;
    }
  return c;
}

}  // namespace

TEST(Rng, SeedZeroMatchesReferenceStream) {
  Rng rng(0);
  EXPECT_EQ(rng.next_u64(), 0xe220a8397b1dcdafULL);

  SplitMixOracle oracle{0};
  RngState s{0};
  for (int i = 0; i < 1000; ++i) {
    auto [u, next] = rng_next_uniform(s);
    ASSERT_EQ(u, oracle.uniform()) << "draw " << i;
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    s = next;
  }
}

TEST(Rng, SameSeedSameStream) {
  Rng a(1234), b(1234);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.uniform(), b.uniform());
}

TEST(Rng, DifferentSeedsDiffer) {
  Rng a(1), b(2);
  int differing = 0;
  for (int i = 0; i < 100; ++i) differing += a.uniform() != b.uniform();
  EXPECT_GT(differing, 0);
}

TEST(Rng, ForkDoesNotAdvanceAndStreamsDiffer) {
  Rng base(7);
  const auto before = base.state();
  Rng f1 = base.fork(1), f2 = base.fork(2), f1b = base.fork(1);
  EXPECT_EQ(base.state(), before);
  EXPECT_EQ(f1.next_u64(), f1b.next_u64());
  EXPECT_NE(f1.next_u64(), f2.next_u64());
}

TEST(Rng, BelowStaysInRange) {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) ASSERT_LT(rng.below(7), 7u);
}

TEST(Glorot, UnitLimitBounds) {
  Rng rng(5);
  const auto w = glorot_uniform(3, 3, {50, 20}, rng);
  for (double v : w.values()) {
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Glorot, VarianceMatchesUniformMoment) {
  Rng rng(11);
  const std::size_t fan_in = 8 * 128, fan_out = 8 * 128;
  const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
  const auto w = glorot_uniform(fan_in, fan_out, {100000}, rng);
  double mean = 0.0, sq = 0.0;
  for (double v : w.values()) mean += v;
  mean /= double(w.size());
  for (double v : w.values()) sq += (v - mean) * (v - mean);
  const double var = sq / double(w.size() - 1);
  EXPECT_NEAR(var / (limit * limit / 3.0), 1.0, 0.05);
}

TEST(Glorot, RowMajorConsumptionAndDeterminism) {
  Rng a(42), b(42);
  const auto w1 = glorot_uniform(2, 2, {2, 2}, a);
  const auto w2 = glorot_uniform(2, 2, {2, 2}, b);
  EXPECT_EQ(w1, w2);
  SplitMixOracle oracle{42};
  const double limit = std::sqrt(6.0 / 4.0);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(w1[i], -limit + 2 * limit * oracle.uniform());
}

TEST(Glorot, ZeroFanRejected) {
  Rng rng(1);
  EXPECT_THROW(glorot_uniform(0, 3, {2}, rng), std::invalid_argument);
  EXPECT_THROW(glorot_uniform(3, 0, {2}, rng), std::invalid_argument);
}

TEST(Tensor, DataLengthMatchesShape) {
  Tensor t(Shape{3, 4, 5}, 2.0);
  EXPECT_EQ(t.size(), 60u);
  EXPECT_THROW(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  EXPECT_THROW(Tensor(Shape{2, 0}), ShapeError);
}

TEST(Tensor, IdentityMatmulLeavesOperand) {
  const auto id = Tensor::matrix(2, 2, {1, 0, 0, 1});
  const auto x = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(matmul(id, x), x);
}

TEST(Tensor, SumOverAxis) {
  const Tensor ones(Shape{4, 5}, 1.0);
  const auto s = sum_over_axis(ones, 1);
  EXPECT_EQ(s.shape(), (Shape{4}));
  for (double v : s.values()) EXPECT_EQ(v, 5.0);
}

TEST(Tensor, MaxOverAxis) {
  const auto x = Tensor::matrix(2, 3, {1, 7, 3, -4, -5, -6});
  const auto m = max_over_axis(x, 1);
  EXPECT_EQ(m, Tensor::from({7, -4}));
  EXPECT_EQ(max_over_axis(x, 0), Tensor::from({1, 7, 3}));
}

TEST(Tensor, MatmulAgainstTripleLoop) {
  Rng rng(9);
  const auto a = check::random_tensor({3, 3}, rng);
  const auto b = check::random_tensor({3, 3}, rng);
  EXPECT_LT(max_abs_diff(matmul(a, b), naive_matmul(a, b)), 1e-12);
}

TEST(Tensor, MatmulTransposeFlags) {
  Rng rng(10);
  const auto a = check::random_tensor({4, 3}, rng);
  const auto b = check::random_tensor({4, 5}, rng);
  const auto c = check::random_tensor({5, 3}, rng);
  EXPECT_LT(max_abs_diff(matmul(a, b, true, false), naive_matmul(transpose(a), b)), 1e-12);
  EXPECT_LT(max_abs_diff(matmul(b, c, false, false), naive_matmul(b, c)), 1e-12);
  EXPECT_LT(max_abs_diff(matmul(c, a, false, true), naive_matmul(c, transpose(a))), 1e-12);
  EXPECT_LT(max_abs_diff(matmul(c, b, true, true), naive_matmul(transpose(c), transpose(b))), 1e-12);
}

TEST(Tensor, MatmulAssociativity) {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = check::random_tensor({8, 8}, rng);
    const auto b = check::random_tensor({8, 8}, rng);
    const auto c = check::random_tensor({8, 8}, rng);
    EXPECT_LT(max_abs_diff(matmul(a, matmul(b, c)), matmul(matmul(a, b), c)), 1e-9);
  }
}

TEST(Tensor, ShapeMismatchNamesBothShapes) {
  const Tensor a(Shape{2, 3}), b(Shape{3, 2});
  try {
    (void)add(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2,3]"), std::string::npos);
    EXPECT_NE(msg.find("[3,2]"), std::string::npos);
  }
  EXPECT_THROW(matmul(a, a), ShapeError);
}

TEST(Tensor, OutputShapeIsFunctionOfInputShapes) {
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t r = 1 + rng.below(5), c = 1 + rng.below(5), k = 1 + rng.below(5);
    const auto a = check::random_tensor({r, c}, rng);
    const auto b = check::random_tensor({r, c}, rng);
    const auto s = Tensor::scalar(rng.uniform());
    EXPECT_EQ(add(a, b).shape(), (Shape{r, c}));
    EXPECT_EQ(sub(a, s).shape(), (Shape{r, c}));
    EXPECT_EQ(mul(s, b).shape(), (Shape{r, c}));
    EXPECT_EQ(matmul(a, check::random_tensor({c, k}, rng)).shape(), (Shape{r, k}));
    EXPECT_EQ(sum_over_axis(a, 0).shape(), (Shape{c}));
    EXPECT_EQ(max_over_axis(a, 1).shape(), (Shape{r}));
    EXPECT_TRUE(add(a, b).all_finite());
  }
}

TEST(Tensor, ScalarBroadcast) {
  const auto a = Tensor::from({1, 2, 3});
  EXPECT_EQ(add(a, Tensor::scalar(1)), Tensor::from({2, 3, 4}));
  EXPECT_EQ(mul(Tensor::scalar(2), a), Tensor::from({2, 4, 6}));
  EXPECT_EQ(scale(a, -1), Tensor::from({-1, -2, -3}));
}
