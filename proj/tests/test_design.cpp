#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "supreg/design.hpp"

using namespace supreg;

namespace {

// Quadrature split at the vanishing points, where the density has a kink.
double quad_mass(const DesignDensity& d, double lo, double hi) {
  std::vector<double> cuts = {lo};
  for (const auto& v : d.vanishing_points())
    if (v.x0 > lo && v.x0 < hi) cuts.push_back(v.x0);
  cuts.push_back(hi);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    total += DesignDensity::integrate([&](double x) { return d(x); }, cuts[i], cuts[i + 1]);
  return total;
}

std::vector<DesignDensity> all_kinds() {
  return {DesignDensity::uniform(), DesignDensity::power_cusp(0.5, 1.0), DesignDensity::power_cusp(0.2, 2.5),
          DesignDensity::power_cusp(0.0, 0.5),
          DesignDensity::piecewise_linear({0.0, 0.3, 0.7, 1.0}, {1.0, 0.0, 2.0, 0.5}),
          DesignDensity::custom([](double x) { return 1.0 + std::sin(6.0 * x); })};
}

}  // namespace

TEST(Density, TotalMassIsOne) {
  for (const auto& d : all_kinds()) {
    EXPECT_NEAR(d.interval_mass({0.0, 1.0}), 1.0, 1e-12) << d.name();
    EXPECT_NEAR(quad_mass(d, 0.0, 1.0), 1.0, 1e-9) << d.name();
  }
}

TEST(Density, IntervalMassMatchesQuadrature) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.2, 1.2);
  for (const auto& d : all_kinds()) {
    for (int t = 0; t < 50; ++t) {
      double a = u(rng), b = u(rng);
      if (a > b) std::swap(a, b);
      const Interval c = clip_unit({a, b});
      EXPECT_NEAR(d.interval_mass({a, b}), quad_mass(d, c.lo, c.hi), 1e-9) << d.name();
    }
  }
}

TEST(Density, PowerCuspSmallWindowHasNoCancellation) {
  const DesignDensity d = DesignDensity::power_cusp(0.5, 1.0);
  // mu = 4|x - 1/2|: mass of [0.75, 0.75 + w] = 2 ((0.25 + w)^2 - 0.0625).
  const double w = (0.75 + 1e-12) - 0.75;
  const double expected = 2.0 * (0.5 * w + w * w);
  EXPECT_NEAR(d.interval_mass({0.75, 0.75 + w}) / expected, 1.0, 1e-9);
}

TEST(Density, QuantileInvertsCdf) {
  for (const auto& d : all_kinds()) {
    for (double u : {0.0, 0.01, 0.2, 0.5, 0.77, 0.99, 1.0}) {
      const double x = d.quantile(u);
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, 1.0);
      EXPECT_NEAR(d.cdf(x), u, 1e-9) << d.name() << " u=" << u;
    }
  }
}

TEST(Density, CustomWithCdfMatchesClosedForm) {
  const DesignDensity cusp = DesignDensity::power_cusp(0.5, 1.0);
  const DesignDensity handle = DesignDensity::custom([](double x) { return std::abs(x - 0.5); },
                                                     [&](double x) { return cusp.cdf(x) / 4.0; },
                                                     {{0.5, 1.0}});
  for (double x : {0.1, 0.45, 0.5, 0.8}) {
    EXPECT_NEAR(handle(x), cusp(x), 1e-12);
    EXPECT_NEAR(handle.interval_mass({x - 0.05, x + 0.05}), cusp.interval_mass({x - 0.05, x + 0.05}), 1e-12);
  }
  EXPECT_DOUBLE_EQ(handle.max_beta(), 1.0);
}

TEST(Density, VanishingPoints) {
  EXPECT_TRUE(DesignDensity::uniform().vanishing_points().empty());
  const auto v = DesignDensity::power_cusp(0.3, 2.0).vanishing_points();
  ASSERT_EQ(v.size(), 1u);
  EXPECT_DOUBLE_EQ(v[0].x0, 0.3);
  EXPECT_DOUBLE_EQ(v[0].beta, 2.0);
  EXPECT_TRUE(DesignDensity::power_cusp(0.3, 0.0).vanishing_points().empty());
  const auto pl = DesignDensity::piecewise_linear({0.0, 0.5, 1.0}, {1.0, 0.0, 1.0}).vanishing_points();
  ASSERT_EQ(pl.size(), 1u);
  EXPECT_DOUBLE_EQ(pl[0].x0, 0.5);
}

TEST(Density, RejectsBadParameters) {
  EXPECT_THROW(DesignDensity::power_cusp(1.5, 1.0), InputError);
  EXPECT_THROW(DesignDensity::power_cusp(0.5, -1.0), InputError);
  EXPECT_THROW(DesignDensity::piecewise_linear({0.0, 1.0}, {0.0, 0.0}), InputError);
  EXPECT_THROW(DesignDensity::piecewise_linear({0.1, 1.0}, {1.0, 1.0}), InputError);
  EXPECT_THROW(DesignDensity::uniform().interval_mass({0.6, 0.4}), InputError);
}

TEST(Sampling, DesignIsSortedAndSeeded) {
  const DesignDensity d = DesignDensity::power_cusp(0.5, 1.0);
  const Design a = draw_design(d, 1000, 42);
  const Design b = draw_design(d, 1000, 42);
  const Design c = draw_design(d, 1000, 43);
  EXPECT_TRUE(std::is_sorted(a.xs.begin(), a.xs.end()));
  EXPECT_EQ(a.xs, b.xs);
  EXPECT_NE(a.xs, c.xs);
}

TEST(Sampling, NoiseStreamDoesNotDependOnDesign) {
  const DesignDensity d = DesignDensity::uniform();
  const Design design = draw_design(d, 200, 5);
  const auto f = [](double x) { return x * x; };
  const Sample s1 = draw_responses(design, f, 0.3, 11);
  const Sample s2 = draw_responses(design, f, 0.3, 11);
  const Sample s3 = draw_responses(design, f, 0.3, 12);
  EXPECT_EQ(s1.ys, s2.ys);
  EXPECT_NE(s1.ys, s3.ys);
  EXPECT_EQ(s1.xs, design.xs);
}

TEST(Sampling, NoiselessResponsesEqualTruth) {
  const auto f = [](double x) { return std::cos(x); };
  const Sample s = sample_model(DesignDensity::uniform(), f, 0.0, 100, 1);
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(s.ys[i], f(s.xs[i]));
  EXPECT_THROW(sample_model(DesignDensity::uniform(), f, -1.0, 10, 1), InputError);
}

TEST(Sampling, MomentsMatchDensity) {
  const DesignDensity d = DesignDensity::power_cusp(0.5, 1.0);
  const Design design = draw_design(d, 20000, 9);
  double m = 0.0, m2 = 0.0;
  for (double x : design.xs) {
    m += x;
    m2 += (x - 0.5) * (x - 0.5);
  }
  m /= 20000.0;
  m2 /= 20000.0;
  // E X = 1/2, E (X - 1/2)^2 = 1/8, Var (X - 1/2)^2 = 1/24 - 1/64.
  EXPECT_NEAR(m, 0.5, 4.0 * std::sqrt(0.125 / 20000.0));
  EXPECT_NEAR(m2, 0.125, 4.0 * std::sqrt((1.0 / 24.0 - 1.0 / 64.0) / 20000.0));
}

TEST(Sampling, MakeSampleSortsStably) {
  const Sample s = make_sample({0.5, 0.1, 0.5, 0.2}, {1.0, 2.0, 3.0, 4.0}, 1.0);
  EXPECT_EQ(s.xs, (std::vector<double>{0.1, 0.2, 0.5, 0.5}));
  EXPECT_EQ(s.ys, (std::vector<double>{2.0, 4.0, 1.0, 3.0}));
  EXPECT_EQ(s.sort_index, (std::vector<std::size_t>{1, 3, 0, 2}));
}

TEST(EmpiricalMeasureTest, ClosedIntervals) {
  const Sample s = make_sample({0.1, 0.2, 0.3, 0.4}, {1.0, 2.0, 3.0, 4.0}, 1.0);
  const EmpiricalMeasure em(s);
  EXPECT_EQ(em.count({0.2, 0.3}), 2u);
  EXPECT_EQ(em.count({0.25, 0.26}), 0u);
  EXPECT_DOUBLE_EQ(em.mass({0.0, 1.0}), 1.0);
  const auto one = [](double) { return 1.0; };
  EXPECT_DOUBLE_EQ(localized_inner(em, {0.1, 0.2}, one, [](double x) { return x; }), 0.15);
  EXPECT_DOUBLE_EQ(localized_response_inner(s, em, {0.3, 0.4}, one), 3.5);
  EXPECT_THROW(localized_norm(em, {0.25, 0.26}, one), EmptyWindowError);
}
