#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "tmnr/special_functions.hpp"

using namespace tmnr;

namespace {

constexpr double kEuler = 0.57721566490153286061;

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST(Digamma, KnownValues) {
  EXPECT_NEAR(digamma(1.0), -kEuler, 1e-10);
  EXPECT_NEAR(digamma(0.5), -kEuler - 2.0 * std::numbers::ln2, 1e-10);
  EXPECT_NEAR(digamma(2.0), 1.0 - kEuler, 1e-10);
  EXPECT_NEAR(digamma(3.0), 1.5 - kEuler, 1e-10);
  // psi(1/4) = -gamma - pi/2 - 3 ln 2
  EXPECT_NEAR(digamma(0.25), -kEuler - std::numbers::pi / 2.0 - 3.0 * std::numbers::ln2, 1e-10);
  // harmonic numbers: psi(n + 1) = H_n - gamma
  double harmonic = 0;
  for (int n = 1; n <= 60; ++n) {
    harmonic += 1.0 / n;
    EXPECT_NEAR(digamma(n + 1.0), harmonic - kEuler, 1e-10) << n;
  }
}

TEST(Digamma, Recurrence) {
  std::mt19937_64 g(1);
  std::uniform_real_distribution<double> x_dist(1e-3, 50.0);
  for (int i = 0; i < 2000; ++i) {
    const double x = x_dist(g);
    EXPECT_NEAR(digamma(x + 1.0), digamma(x) + 1.0 / x, 1e-10 * std::max(1.0, 1.0 / x)) << x;
  }
}

TEST(Digamma, MatchesDerivativeOfStdLgamma) {
  for (double x : {0.3, 0.7, 1.3, 2.5, 7.0, 9.99, 10.01, 33.3, 250.0}) {
    const double h = 1e-5 * x;
    const double fd = (std::lgamma(x + h) - std::lgamma(x - h)) / (2 * h);
    EXPECT_LT(rel_err(digamma(x), fd), 1e-8) << x;
  }
}

TEST(Digamma, LargeArgumentsApproachLog) {
  EXPECT_NEAR(digamma(1e8), std::log(1e8) - 0.5e-8, 1e-12);
}

TEST(Digamma, RejectsNonPositive) {
  EXPECT_THROW(digamma(0.0), std::domain_error);
  EXPECT_THROW(digamma(-1.5), std::domain_error);
  EXPECT_THROW(digamma(std::nan("")), std::domain_error);
  EXPECT_THROW(digamma(INFINITY), std::domain_error);
}

TEST(Trigamma, KnownValues) {
  const double pi2 = std::numbers::pi * std::numbers::pi;
  EXPECT_NEAR(trigamma(1.0), pi2 / 6.0, 1e-10);
  EXPECT_NEAR(trigamma(0.5), pi2 / 2.0, 1e-10);
  EXPECT_NEAR(trigamma(2.0), pi2 / 6.0 - 1.0, 1e-10);
}

TEST(Trigamma, RecurrenceAndDerivative) {
  std::mt19937_64 g(2);
  std::uniform_real_distribution<double> x_dist(1e-2, 40.0);
  for (int i = 0; i < 1000; ++i) {
    const double x = x_dist(g);
    EXPECT_NEAR(trigamma(x + 1.0), trigamma(x) - 1.0 / (x * x), 1e-10 * std::max(1.0, 1.0 / (x * x)));
  }
  for (double x : {0.4, 1.5, 9.5, 10.5, 80.0}) {
    const double h = 1e-5 * x;
    EXPECT_LT(rel_err(trigamma(x), (digamma(x + h) - digamma(x - h)) / (2 * h)), 1e-7) << x;
  }
  EXPECT_THROW(trigamma(0.0), std::domain_error);
}

TEST(LogGamma, KnownValues) {
  EXPECT_NEAR(log_gamma(1.0), 0.0, 1e-12);
  EXPECT_NEAR(log_gamma(2.0), 0.0, 1e-12);
  EXPECT_NEAR(log_gamma(0.5), 0.5 * std::log(std::numbers::pi), 1e-12);
  double log_factorial = 0;  // ln n!
  for (int n = 1; n <= 100; ++n) {
    log_factorial += std::log(static_cast<double>(n));
    EXPECT_NEAR(log_gamma(n + 1.0), log_factorial, 1e-12 * std::max(1.0, log_factorial)) << n;
  }
}

TEST(LogGamma, MatchesStdLgamma) {
  std::mt19937_64 g(3);
  std::uniform_real_distribution<double> x_dist(1e-4, 300.0);
  for (int i = 0; i < 5000; ++i) {
    const double x = x_dist(g);
    const double expected = std::lgamma(x);
    // absolute floor near the zeros of lgamma at 1 and 2
    EXPECT_NEAR(log_gamma(x), expected, 1e-12 * std::max(1.0, std::abs(expected))) << x;
  }
}

TEST(LogGamma, Recurrence) {
  for (double x = 0.05; x < 30.0; x += 0.37) {
    EXPECT_NEAR(log_gamma(x + 1.0), log_gamma(x) + std::log(x), 1e-10 * std::max(1.0, std::abs(log_gamma(x))));
  }
  EXPECT_THROW(log_gamma(-2.0), std::domain_error);
}

TEST(SpecialFunctions, WorkInLongDouble) {
  EXPECT_NEAR(static_cast<double>(digamma(1.0L)), -kEuler, 1e-12);
  EXPECT_NEAR(static_cast<double>(log_gamma(0.5L)), 0.5 * std::log(std::numbers::pi), 1e-12);
}
