#include <gtest/gtest.h>

#include "mirrorflow/smoothing.hpp"

using namespace mirrorflow;

namespace {
const double kMus[] = {1e-6, 1e-3, 0.1, 1.0, 10.0};
}

TEST(Smoothing, AbsSandwich) {
  SeededRng rng(1);
  for (double mu : kMus)
    for (int i = 0; i < 2000; ++i) {
      const double s = 3.0 * mu * rng.gaussian();
      const double v = smooth_abs(s, mu).value;
      ASSERT_GE(v, std::abs(s));
      ASSERT_LE(v, std::abs(s) + 0.25 * mu + 1e-15);
    }
}

TEST(Smoothing, MaxZeroSandwich) {
  SeededRng rng(2);
  for (double mu : kMus)
    for (int i = 0; i < 2000; ++i) {
      const double s = 3.0 * mu * rng.gaussian();
      const double v = smooth_max_zero(s, mu).value;
      ASSERT_GE(v, std::max(s, 0.0));
      ASSERT_LE(v, std::max(s, 0.0) + 0.25 * mu + 1e-15);
    }
}

TEST(Smoothing, ContinuousAtTheKinks) {
  for (double mu : kMus) {
    for (double s : {0.5 * mu, -0.5 * mu}) {
      const double below = std::nextafter(s, 0.0), above = std::nextafter(s, s * 3);
      EXPECT_NEAR(smooth_abs(below, mu).value, smooth_abs(above, mu).value, 1e-15 * std::max(1.0, mu));
      EXPECT_NEAR(smooth_abs(below, mu).grad, smooth_abs(above, mu).grad, 1e-12);
    }
    for (double s : {mu, -mu}) {
      EXPECT_NEAR(smooth_max_zero(std::nextafter(s, 0.0), mu).value, smooth_max_zero(std::nextafter(s, 3 * s), mu).value,
                  1e-15 * std::max(1.0, mu));
      EXPECT_NEAR(smooth_max_zero(std::nextafter(s, 0.0), mu).grad, smooth_max_zero(std::nextafter(s, 3 * s), mu).grad,
                  1e-12);
    }
  }
}

TEST(Smoothing, GradientMatchesDifferences) {
  SeededRng rng(3);
  for (double mu : {0.1, 1.0}) {
    for (int i = 0; i < 500; ++i) {
      const double s = 2.0 * rng.gaussian(), h = 1e-7;
      ASSERT_NEAR((smooth_abs(s + h, mu).value - smooth_abs(s - h, mu).value) / (2 * h), smooth_abs(s, mu).grad, 1e-6);
      ASSERT_NEAR((smooth_max_zero(s + h, mu).value - smooth_max_zero(s - h, mu).value) / (2 * h),
                  smooth_max_zero(s, mu).grad, 1e-6);
    }
  }
}

TEST(Smoothing, GradientIsLipschitzWithConstantOverMu) {
  SeededRng rng(4);
  for (double mu : kMus)
    for (int i = 0; i < 2000; ++i) {
      const double a = mu * rng.gaussian(), b = mu * rng.gaussian();
      ASSERT_LE(std::abs(smooth_abs(a, mu).grad - smooth_abs(b, mu).grad), 2.0 / mu * std::abs(a - b) * (1 + 1e-12));
      ASSERT_LE(std::abs(smooth_max_zero(a, mu).grad - smooth_max_zero(b, mu).grad),
                0.5 / mu * std::abs(a - b) * (1 + 1e-12));
    }
}

TEST(Smoothing, ValueIsMonotoneInMu) {
  SeededRng rng(5);
  for (int i = 0; i < 2000; ++i) {
    const double s = rng.gaussian();
    double prev = -kInf;
    for (double mu : kMus) {
      const double v = smooth_abs(s, mu).value;
      ASSERT_GE(v, prev);
      prev = v;
    }
  }
}

TEST(Smoothing, MinMaxMidLimits) {
  EXPECT_DOUBLE_EQ(smooth_max(3.0, 1.0, 0.1), 3.0);
  EXPECT_DOUBLE_EQ(smooth_min(3.0, 1.0, 0.1), 1.0);
  EXPECT_DOUBLE_EQ(smooth_mid(5.0, 0.0, 2.0, 0.1), 2.0);
  EXPECT_DOUBLE_EQ(smooth_mid(-5.0, 0.0, 2.0, 0.1), 0.0);
  EXPECT_DOUBLE_EQ(smooth_mid(1.0, 0.0, 2.0, 0.1), 1.0);
}

TEST(Smoothing, L1SumsCoordinates) {
  Vector x(3);
  x << 2.0, -0.01, 0.0;
  const auto r = smooth_l1(x, 0.1);
  EXPECT_NEAR(r.value, 2.0 + (1e-4 / 0.1 + 0.025) + 0.025, 1e-15);
  EXPECT_EQ(r.grad(0), 1.0);
  EXPECT_NEAR(r.grad(1), -0.2, 1e-15);
  EXPECT_EQ(r.grad(2), 0.0);
  EXPECT_EQ(smooth_l1_kappa(8), 2.0);
  EXPECT_LE(r.value - x.lpNorm<1>(), smooth_l1_kappa(3) * 0.1);
}

TEST(Smoothing, ScheduleDecaysAtTwiceAlpha) {
  const MuSchedule s(2.0, 3.0);
  EXPECT_EQ(s(1.0), 2.0);
  EXPECT_NEAR(s(10.0), 2e-6, 1e-20);
  EXPECT_NEAR(std::log(s(100.0) / s(10.0)) / std::log(10.0), -6.0, 1e-12);
  EXPECT_THROW(s(0.5), ParameterError);
  EXPECT_NO_THROW(s(1.0 - 1e-14));
}

TEST(Smoothing, BadMu) {
  EXPECT_THROW(smooth_abs(1.0, 0.0), ParameterError);
  EXPECT_THROW(smooth_max_zero(1.0, -1.0), ParameterError);
  EXPECT_THROW(smooth_abs(1.0, kInf), ParameterError);
  EXPECT_THROW(MuSchedule(0.0, 1.0), ParameterError);
  EXPECT_THROW(MuSchedule(1.0, 0.0), ParameterError);
}
