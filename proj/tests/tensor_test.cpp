#include <gtest/gtest.h>

#include <cmath>

#include "segner/tensor.hpp"

namespace segner {
namespace {

TEST(Affine, IdentityZeroAndHandCases) {
  Vec64 x(2);
  x << 3, 4;
  EXPECT_EQ(affine(Mat64::Identity(2, 2), x, Vec64::Zero(2)), x);

  Vec64 b(2);
  b << 1, 2;
  EXPECT_EQ(affine(Mat64::Zero(2, 2), x, b), b);

  Mat64 W(2, 2);
  W << 1, 2, 3, 4;
  Vec64 ones = Vec64::Ones(2);
  Vec64 b2(2);
  b2 << 1, 0;
  Vec64 expect(2);
  expect << 4, 7;
  EXPECT_EQ(affine(W, ones, b2), expect);
}

TEST(Affine, MismatchNamesBothShapes) {
  try {
    affine(Mat64::Zero(2, 3), Vec64::Zero(2), Vec64::Zero(2));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2x3"), std::string::npos);
    EXPECT_NE(msg.find("2x1"), std::string::npos);
  }
}

TEST(LogSumExp, Examples) {
  EXPECT_NEAR(logsumexp(Vec64::Zero(2)), 0.6931471805599453, 1e-15);
  EXPECT_EQ(logsumexp(Vec64::Constant(1, 5.0)), 5.0);
  const double big = logsumexp(Vec64::Constant(2, 1000.0));
  EXPECT_TRUE(std::isfinite(big));
  EXPECT_NEAR(big, 1000.0 + std::log(2.0), 1e-12);
  EXPECT_THROW(logsumexp(Vec64()), std::invalid_argument);
}

TEST(LogSumExp, BoundsAndShiftProperty) {
  Rng rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    const Index n = 1 + static_cast<Index>(rng.uniform_int(12));
    Vec64 v(n);
    for (Index i = 0; i < n; ++i) v(i) = rng.uniform(-50, 50);
    const double lse = logsumexp(v);
    EXPECT_GE(lse, v.maxCoeff());
    EXPECT_LE(lse, v.maxCoeff() + std::log(static_cast<double>(n)) + 1e-12);
    const double c = rng.uniform(-100, 100);
    EXPECT_NEAR(logsumexp((v.array() + c).matrix()), lse + c, 1e-12);
  }
}

TEST(Rng, ReferenceVectors) {
  // xoshiro256** with splitmix64 seeding, checked against an independent
  // Python implementation.
  Rng zero(0);
  EXPECT_EQ(zero.next_u64(), 0x99ec5f36cb75f2b4ULL);
  EXPECT_EQ(zero.next_u64(), 0xbf6e1f784956452aULL);
  EXPECT_EQ(zero.next_u64(), 0x1a5f849d4933e6e0ULL);
  EXPECT_EQ(zero.next_u64(), 0x6aa594f1262d2d2cULL);
  EXPECT_EQ(zero.next_u64(), 0xbba5ad4a1f842e59ULL);

  Rng answer(42);
  EXPECT_EQ(answer.next_u64(), 0x15780b2e0c2ec716ULL);
  EXPECT_EQ(answer.next_u64(), 0x6104d9866d113a7eULL);

  Rng u(42);
  EXPECT_DOUBLE_EQ(u.uniform01(), 0.08386297105988216);
  EXPECT_DOUBLE_EQ(u.uniform01(), 0.3789802506626686);
}

TEST(Rng, EqualSeedsGiveIdenticalStreams) {
  Rng a(123), b(123), c(124);
  bool differs = false;
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs |= x != c.next_u64();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, UniformIntStaysInRange) {
  Rng rng(3);
  std::vector<int> hist(7, 0);
  for (int i = 0; i < 7000; ++i) ++hist[rng.uniform_int(7)];
  for (int h : hist) EXPECT_GT(h, 800);
  EXPECT_THROW(rng.uniform_int(0), std::invalid_argument);
}

TEST(Dropout, RateZeroIsIdentity) {
  Rng rng(1);
  EXPECT_EQ(dropout_mask(50, 0.0, rng), Vec64::Ones(50));
}

TEST(Dropout, LawOfLargeNumbers) {
  Rng rng(2024);
  const Vec64 m = dropout_mask(100000, 0.1, rng);
  EXPECT_NEAR(m.mean(), 1.0, 0.01);
  const double keep = 1.0 / 0.9;
  for (Index i = 0; i < m.size(); ++i) EXPECT_TRUE(m(i) == 0.0 || m(i) == keep);
}

TEST(Dropout, HalfRateScalesKeptEntriesToTwo) {
  Rng rng(5);
  const Vec64 m = dropout_mask(1000, 0.5, rng);
  for (Index i = 0; i < m.size(); ++i) EXPECT_TRUE(m(i) == 0.0 || m(i) == 2.0);
  EXPECT_THROW(dropout_mask(3, 1.0, rng), std::invalid_argument);
  EXPECT_THROW(dropout_mask(3, -0.1, rng), std::invalid_argument);
}

TEST(Sgd, Examples) {
  Vec64 p(1), g(1);
  p << 1;
  g << 2;
  EXPECT_NEAR(sgd_step(p, g, 0.05)(0), 0.9, 1e-15);
  EXPECT_EQ(sgd_step(p, Vec64::Zero(1), 0.05), p);

  Vec64 p2(2), g2(2), e(2);
  p2 << 0, 1;
  g2 << 1, -1;
  e << -0.1, 1.1;
  EXPECT_TRUE(sgd_step(p2, g2, 0.1).isApprox(e, 1e-15));
  EXPECT_THROW(sgd_step(p2, Vec64::Zero(3), 0.1), DimensionError);
}

TEST(GradCheck, Examples) {
  const ScalarFn square = [](const Vec64& v) { return v(0) * v(0); };
  Vec64 x(1);
  x << 3;
  Vec64 g(1);
  g << 6;
  EXPECT_LT(grad_check(square, g, x, 1e-5), 1e-8);

  // Doubled: |12 - 6| / max(1, 12, 6) = 0.5
  g << 12;
  EXPECT_NEAR(grad_check(square, g, x, 1e-5), 0.5, 1e-8);

  const ScalarFn constant = [](const Vec64&) { return 4.0; };
  EXPECT_EQ(grad_check(constant, Vec64::Zero(3), Vec64::Ones(3), 1e-5), 0.0);
}

TEST(GradCheck, NonFiniteNamesCoordinate) {
  const ScalarFn f = [](const Vec64& v) { return v(1) > 0.5 ? std::nan("") : v.sum(); };
  Vec64 p(2);
  p << 0.0, 0.5;
  try {
    grad_check(f, Vec64::Ones(2), p, 1e-3);
    FAIL() << "expected throw";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("coordinate 1"), std::string::npos);
  }
}

TEST(GradCheck, SmoothFunctionProperty) {
  Rng rng(11);
  const ScalarFn f = [](const Vec64& v) { return std::sin(v(0)) * std::exp(v(1)) + v(2) * v(2) * v(0); };
  for (int trial = 0; trial < 50; ++trial) {
    Vec64 p(3);
    for (Index i = 0; i < 3; ++i) p(i) = rng.uniform(-2, 2);
    Vec64 g(3);
    g << std::cos(p(0)) * std::exp(p(1)) + p(2) * p(2), std::sin(p(0)) * std::exp(p(1)), 2 * p(2) * p(0);
    EXPECT_LE(grad_check(f, g, p, 1e-5), 1e-4);
  }
}

}  // namespace
}  // namespace segner
