#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <random>

#include "supreg/rate.hpp"

using namespace supreg;

namespace {

// Symmetric window around the center of mu = c |x - 1/2|^beta:
// mu([1/2 - h, 1/2 + h]) = (2h)^(beta + 1).
double cusp_center_h(const HolderSpec& spec, double sigma, double n, double beta) {
  return std::pow(sigma * sigma * std::log(n) / (n * spec.L * spec.L * std::pow(2.0, beta + 1.0)),
                  1.0 / (2.0 * spec.s + 1.0 + beta));
}

}  // namespace

TEST(RateSolver, UniformInteriorClosedForm) {
  for (double s : {0.5, 1.0, 2.0, 3.5})
    for (double sigma : {0.1, 1.0})
      for (double n : {1e3, 1e5, 1e8}) {
        const HolderSpec spec(s, 1.3);
        const double expected = uniform_interior_h(spec, sigma, n);
        ASSERT_LT(expected, 0.5);
        for (double x : {0.5, 0.5 - 0.4 * (0.5 - expected)})
          EXPECT_NEAR(solve_h(DesignDensity::uniform(), spec, sigma, n, x) / expected, 1.0, 1e-9);
      }
}

TEST(RateSolver, UniformInteriorExampleValue) {
  const double h = solve_h(DesignDensity::uniform(), HolderSpec(1.0, 1.0), 1.0, 1000.0, 0.5);
  EXPECT_NEAR(h, std::cbrt(std::log(1000.0) / 2000.0), 1e-12);
  EXPECT_NEAR(h, 0.15116, 1e-5);
}

TEST(RateSolver, PowerCuspAtCenterClosedForm) {
  for (double beta : {0.5, 1.0, 2.0})
    for (double n : {1e4, 1e6}) {
      const HolderSpec spec(1.0, 1.0);
      const DesignDensity d = DesignDensity::power_cusp(0.5, beta);
      const double expected = cusp_center_h(spec, 0.5, n, beta);
      EXPECT_NEAR(solve_h(d, spec, 0.5, n, 0.5) / expected, 1.0, 1e-9) << beta;
    }
}

TEST(RateSolver, ResidualOnRandomConfigs) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto start = std::chrono::steady_clock::now();
  for (int t = 0; t < 200; ++t) {
    const HolderSpec spec(0.3 + 3.0 * u(rng), 0.5 + 2.0 * u(rng));
    const DesignDensity d = t % 3 == 0 ? DesignDensity::uniform()
                            : t % 3 == 1 ? DesignDensity::power_cusp(u(rng), 3.0 * u(rng))
                                         : DesignDensity::piecewise_linear({0.0, 0.4, 1.0}, {0.2, 0.0, 1.5});
    const double n = std::pow(10.0, 3.0 + 5.0 * u(rng));
    const double sigma = 0.05 + u(rng);
    const double x = u(rng);
    const double h = solve_h(d, spec, sigma, n, x);
    EXPECT_LE(rate_residual(d, spec, sigma, n, x, h), 1e-10);
  }
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 5.0);
}

TEST(RateSolver, NoRootWhenNTooSmall) {
  try {
    solve_h(DesignDensity::uniform(), HolderSpec(1.0, 0.01), 10.0, 10.0, 0.3);
    FAIL() << "expected NoRootError";
  } catch (const NoRootError& e) {
    EXPECT_DOUBLE_EQ(e.x(), 0.3);
  }
  EXPECT_THROW(solve_h(DesignDensity::uniform(), HolderSpec(1.0, 1.0), 0.0, 100.0, 0.3), InputError);
  EXPECT_THROW(solve_h(DesignDensity::uniform(), HolderSpec(1.0, 1.0), 1.0, 2.0, 0.3), InputError);
  EXPECT_THROW(solve_h(DesignDensity::uniform(), HolderSpec(1.0, 1.0), 1.0, 100.0, 1.3), InputError);
}

TEST(RateExponent, CuspFormulaSpecialValues) {
  for (double n : {1e4, 1e6, 1e8}) {
    EXPECT_NEAR(cusp_alpha_closed_form(n, 0.5), 0.25, 1e-14);
    EXPECT_NEAR(cusp_alpha_closed_form(n, 0.0), 1.0 / 3.0, 1e-14);
    EXPECT_NEAR(cusp_alpha_closed_form(n, 1.0), 1.0 / 3.0, 1e-14);
  }
  EXPECT_THROW(cusp_alpha_closed_form(1e4, -0.1), InputError);
}

TEST(RateExponent, CuspFormulaIsContinuousAtBranchPoints) {
  const double n = 1e6;
  const auto [left, right] = cusp_branch_points(n);
  for (double b : {left, right}) {
    EXPECT_NEAR(cusp_alpha_closed_form(n, b - 1e-12), cusp_alpha_closed_form(n, b + 1e-12), 1e-6);
  }
}

TEST(RateExponent, CuspFormulaIsTheSolverWithSigmaTwo) {
  // The formula corresponds to L h^s = 2 sqrt(log n / (n mu)) on mu = 4|x - 1/2|,
  // away from boundary clipping.
  const DesignDensity d = DesignDensity::power_cusp(0.5, 1.0);
  const HolderSpec spec(1.0, 1.0);
  for (double n : {1e4, 1e6, 1e8}) {
    for (double x : uniform_grid(101)) {
      const double h = solve_h(d, spec, 2.0, n, x);
      if (x - h < 0.0 || x + h > 1.0) continue;
      EXPECT_NEAR(rate_exponent(h, n), cusp_alpha_closed_form(n, x), 1e-9) << "n=" << n << " x=" << x;
    }
  }
}

TEST(RateExponent, LiteralNoiseLevelDiffersByAConstantFactor) {
  // With sigma = 1 the rate differs from the formula's by at most a factor 4^(1/3),
  // so the exponent gap is at most (ln 4 / 3) / |log(log n / n)|.
  const DesignDensity d = DesignDensity::power_cusp(0.5, 1.0);
  const HolderSpec spec(1.0, 1.0);
  const double C = std::log(4.0) / 3.0;
  for (double n : {1e4, 1e6, 1e8}) {
    const double scale = std::abs(std::log(std::log(n) / n));
    for (double x : uniform_grid(101)) {
      const double h = solve_h(d, spec, 1.0, n, x);
      if (x - h < 0.0 || x + h > 1.0) continue;
      EXPECT_LE(std::abs(rate_exponent(h, n) - cusp_alpha_closed_form(n, x)) * scale, C * (1.0 + 1e-9));
    }
  }
}

TEST(RateCurveTest, ContinuityUnderRefinement) {
  const DesignDensity d = DesignDensity::power_cusp(0.5, 1.0);
  const HolderSpec spec(1.0, 1.0);
  double previous = HUGE_VAL;
  for (std::size_t points : {11u, 101u, 1001u}) {
    const RateCurve c = rate_curve(d, spec, 1.0, 1e5, uniform_grid(points));
    double jump = 0.0;
    for (std::size_t j = 1; j < c.size(); ++j) jump = std::max(jump, std::abs(c.h[j] - c.h[j - 1]));
    EXPECT_LT(jump, previous);
    previous = jump;
  }
  EXPECT_LT(previous, 1e-3);
}

TEST(RateCurveTest, ThreadCountDoesNotChangeResults) {
  const DesignDensity d = DesignDensity::power_cusp(0.3, 2.0);
  const HolderSpec spec(1.5, 1.0);
  const RateCurve a = rate_curve(d, spec, 0.7, 1e4, uniform_grid(257), 1);
  const RateCurve b = rate_curve(d, spec, 0.7, 1e4, uniform_grid(257), 4);
  EXPECT_EQ(a.h, b.h);
  EXPECT_EQ(a.alpha, b.alpha);
}

TEST(RateCurveTest, InterpolationHitsNodes) {
  const RateCurve c = rate_curve(DesignDensity::uniform(), HolderSpec(1.0, 1.0), 1.0, 1e4, uniform_grid(5));
  EXPECT_DOUBLE_EQ(c.rate_at(0.25), c.rate[1]);
  EXPECT_DOUBLE_EQ(c.rate_at(0.125), 0.5 * (c.rate[0] + c.rate[1]));
  EXPECT_DOUBLE_EQ(c.rate_at(-1.0), c.rate[0]);
}
