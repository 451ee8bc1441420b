#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "drmoe/error.hpp"
#include "drmoe/math.hpp"
#include "support/oracles.hpp"

using namespace drmoe;

TEST(Matvec, IdentityAndZero) {
  EXPECT_EQ(matvec(Mat::identity(2), Vec{3, 4}), (Vec{3, 4}));
  EXPECT_EQ(matvec(Mat(2, 2), Vec{3, 4}), (Vec{0, 0}));
}

TEST(Matvec, RowSums) {
  const Mat m = Mat::from_rows({{1, 2}, {3, 4}});
  EXPECT_EQ(matvec(m, Vec{1, 1}), (Vec{3, 7}));
}

TEST(Matvec, DimensionMismatchNamesBothShapes) {
  try {
    matvec(Mat(2, 3), Vec{1, 2});
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2x3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("length 2"), std::string::npos) << msg;
  }
}

TEST(Matvec, Linearity) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const Mat m = oracle::random_mat(rng, 5, 4);
    const Vec x = oracle::random_vec(rng, 4);
    const Vec y = oracle::random_vec(rng, 4);
    const double a = oracle::random_vec(rng, 1)[0];
    const double b = oracle::random_vec(rng, 1)[0];
    Vec combo(4);
    for (std::size_t i = 0; i < 4; ++i) combo[i] = a * x[i] + b * y[i];
    const Vec lhs = matvec(m, combo);
    const Vec mx = matvec(m, x);
    const Vec my = matvec(m, y);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(lhs[i], a * mx[i] + b * my[i], 1e-12);
  }
}

TEST(Sigmoid, Values) {
  EXPECT_EQ(sigmoid(0.0), 0.5);
  EXPECT_DOUBLE_EQ(sigmoid(40.0), 1.0);
  EXPECT_LE(sigmoid(40.0), 1.0);
  // 1 / (1 + e^40) to 40 digits (mpmath)
  const double expected = 4.248354255291588977e-18;
  EXPECT_GT(sigmoid(-40.0), 0.0);
  EXPECT_NEAR(sigmoid(-40.0) / expected, 1.0, 1e-14);
}

TEST(Sigmoid, NoOverflowAtExtremes) {
  for (double x : {-700.0, -100.0, 100.0, 700.0}) {
    const double s = sigmoid(x);
    EXPECT_TRUE(std::isfinite(s));
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
  }
  EXPECT_GT(sigmoid(-700.0), 0.0);
}

TEST(LogSoftmax, Uniform) {
  const Vec out = log_softmax(Vec{0, 0});
  EXPECT_DOUBLE_EQ(out[0], -std::log(2.0));
  EXPECT_DOUBLE_EQ(out[1], -std::log(2.0));
}

TEST(LogSoftmax, LargeLogitsStayFinite) {
  const Vec out = log_softmax(Vec{1000, 0});
  EXPECT_NEAR(out[0], 0.0, 1e-300);
  EXPECT_DOUBLE_EQ(out[1], -1000.0);
}

TEST(LogSoftmax, ThreeClasses) {
  // z_i - log(e + e^2 + e^3), mpmath
  const Vec out = log_softmax(Vec{1, 2, 3});
  EXPECT_NEAR(out[0], -2.4076059644443803, 1e-15);
  EXPECT_NEAR(out[1], -1.4076059644443803, 1e-15);
  EXPECT_NEAR(out[2], -0.40760596444438030, 1e-15);
}

TEST(LogSoftmax, ExponentiatesToDistribution) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec z = oracle::random_vec(rng, 2 + trial % 5, -50.0, 50.0);
    const Vec lp = log_softmax(z);
    double total = 0.0;
    for (double v : lp) {
      EXPECT_LE(v, 0.0);
      total += std::exp(v);
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(FiniteDiff, QuadraticAndConstant) {
  const Vec g = finite_diff_grad([](std::span<const double> x) { return dot(x, x); }, Vec{1, 2}, 1e-5);
  EXPECT_NEAR(g[0], 2.0, 1e-8);
  EXPECT_NEAR(g[1], 4.0, 1e-8);
  const Vec zero = finite_diff_grad([](std::span<const double>) { return 3.0; }, Vec{1, 2, 3}, 1e-5);
  EXPECT_EQ(zero, (Vec{0, 0, 0}));
}

TEST(FiniteDiff, SigmoidSlopeAtZero) {
  const Vec g = finite_diff_grad([](std::span<const double> x) { return sigmoid(x[0]); }, Vec{0.0}, 1e-5);
  EXPECT_NEAR(g[0], 0.25, 1e-10);
}

TEST(FiniteDiff, NonFiniteValueNamesCoordinate) {
  const auto f = [](std::span<const double> x) { return x[1] > 5.0 ? std::nan("") : x[0]; };
  try {
    finite_diff_grad(f, Vec{0.0, 5.0}, 1e-3);
    FAIL() << "expected RuntimeError";
  } catch (const RuntimeError& e) {
    EXPECT_NE(std::string(e.what()).find("coordinate 1"), std::string::npos) << e.what();
  }
  EXPECT_THROW(finite_diff_grad(f, Vec{0.0}, 0.0), ValidationError);
}

TEST(Matmul, AgreesWithMatvecComposition) {
  std::mt19937_64 rng(3);
  const Mat a = oracle::random_mat(rng, 4, 3);
  const Mat b = oracle::random_mat(rng, 3, 5);
  const Vec x = oracle::random_vec(rng, 5);
  const Vec lhs = matvec(matmul(a, b), x);
  const Vec rhs = matvec(a, matvec(b, x));
  for (std::size_t i = 0; i < lhs.size(); ++i) EXPECT_NEAR(lhs[i], rhs[i], 1e-12);
  EXPECT_EQ(transpose(transpose(a)), a);
  const Vec y = oracle::random_vec(rng, 4);
  const Vec t1 = matvec_transposed(a, y);
  const Vec t2 = matvec(transpose(a), y);
  for (std::size_t i = 0; i < t1.size(); ++i) EXPECT_NEAR(t1[i], t2[i], 1e-14);
}
