#include "frepel/flory.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "frepel/rng.hpp"

using namespace frepel;

namespace {

bool has_label(const std::vector<RegimeLabel>& labels, RegimeLabel want) {
  return std::find(labels.begin(), labels.end(), want) != labels.end();
}

}  // namespace

TEST(FloryIndex, ClassicalAnchors) {
  EXPECT_DOUBLE_EQ(flory_index(0.5, 3).nu, 0.6);
  EXPECT_DOUBLE_EQ(flory_index(0.5, 4).nu, 0.5);
  EXPECT_DOUBLE_EQ(flory_index(0.5, 1).nu, 1.0);
  EXPECT_DOUBLE_EQ(flory_index(0.5, 2).nu, 0.75);
  EXPECT_DOUBLE_EQ(critical_dimension(0.5), 4.0);
  EXPECT_DOUBLE_EQ(critical_dimension(0.25), 8.0);
}

TEST(FloryIndex, FreeExponentAtCriticalDimension) {
  EXPECT_DOUBLE_EQ(flory_index_value(0.5, 4.0), 0.5);
  for (double h : {0.2, 1.0 / 3.0, 2.0 / 3.0, 0.8})
    EXPECT_NEAR(flory_index_value(h, critical_dimension(h)), h, 1e-15);
}

TEST(FloryIndex, OneDimensionalPiecewiseValue) {
  EXPECT_DOUBLE_EQ(flory_index_one_dim(0.3), 2.6 / 3.0);
  EXPECT_DOUBLE_EQ(flory_index_one_dim(0.5), 1.0);
  for (double h : {0.55, 0.7, 0.95}) EXPECT_DOUBLE_EQ(flory_index_one_dim(h), 1.0);
  // small-h limit approaches 2/3, the pure repulsion value
  EXPECT_NEAR(flory_index_one_dim(1e-9), 2.0 / 3.0, 1e-8);
}

TEST(FloryIndex, DomainValidation) {
  EXPECT_THROW(flory_index_value(0.0, 3.0), std::domain_error);
  EXPECT_THROW(flory_index_value(1.0, 3.0), std::domain_error);
  EXPECT_THROW(flory_index_value(0.5, 0.0), std::domain_error);
  EXPECT_THROW(critical_dimension(1.5), std::domain_error);
  EXPECT_THROW(flory_index_one_dim(-0.1), std::domain_error);
  EXPECT_THROW(flory_index(0.5, 0), std::invalid_argument);
}

TEST(RegimeMap, PinnedExamples) {
  {
    const auto labels = classify_regime(0.5, 3.0);
    ASSERT_EQ(labels.size(), 1u);
    EXPECT_TRUE(has_label(labels, RegimeLabel::double_points_present));
  }
  {
    const auto labels = classify_regime(0.25, 4.0);
    ASSERT_EQ(labels.size(), 1u);
    EXPECT_TRUE(has_label(labels, RegimeLabel::edwards_critical));
  }
  {
    const auto labels = classify_regime(0.8, 3.0);
    EXPECT_TRUE(has_label(labels, RegimeLabel::no_double_points));
    EXPECT_TRUE(has_label(labels, RegimeLabel::above_critical_dimension));
    EXPECT_FALSE(has_label(labels, RegimeLabel::double_points_present));
  }
  {
    const auto labels = classify_regime(0.75, 1.0);
    EXPECT_TRUE(has_label(labels, RegimeLabel::edwards_well_defined));
    EXPECT_TRUE(has_label(labels, RegimeLabel::flory_unphysical_nu));
  }
  {
    // h * d lands on the boundary only up to rounding; the tolerance is
    // what keeps this critical instead of arbitrarily one-sided
    const auto labels = classify_regime(1.0 / 3.0, 3.0);
    EXPECT_TRUE(has_label(labels, RegimeLabel::edwards_critical));
    EXPECT_FALSE(has_label(labels, RegimeLabel::edwards_well_defined));
    EXPECT_FALSE(has_label(labels, RegimeLabel::double_points_present));
  }
  EXPECT_THROW(classify_regime(0.5, -1.0), std::domain_error);
}

TEST(RegimeMap, LabelConsistencyOnGrid) {
  for (int hi = 1; hi <= 19; ++hi)
    for (int d = 1; d <= 19; ++d) {
      const double h = 0.05 * hi;
      const auto labels = classify_regime(h, static_cast<double>(d));
      ASSERT_FALSE(labels.empty()) << "h=" << h << " d=" << d;
      const double hd = h * d;
      if (has_label(labels, RegimeLabel::edwards_well_defined)) EXPECT_LT(hd, 1.0 + kRegimeTol);
      EXPECT_EQ(has_label(labels, RegimeLabel::no_double_points), hd >= 2.0 - kRegimeTol);
      EXPECT_EQ(has_label(labels, RegimeLabel::no_double_points),
                has_label(labels, RegimeLabel::above_critical_dimension));
    }
}

TEST(RegimeMap, LabelNamesPinned) {
  EXPECT_STREQ(regime_label_name(RegimeLabel::edwards_well_defined), "edwards-well-defined");
  EXPECT_STREQ(regime_label_name(RegimeLabel::edwards_critical), "edwards-critical");
  EXPECT_STREQ(regime_label_name(RegimeLabel::double_points_present), "double-points-present");
  EXPECT_STREQ(regime_label_name(RegimeLabel::no_double_points), "no-double-points");
  EXPECT_STREQ(regime_label_name(RegimeLabel::above_critical_dimension),
               "above-critical-dimension");
  EXPECT_STREQ(regime_label_name(RegimeLabel::flory_unphysical_nu), "flory-unphysical-nu");
}

TEST(FloryPrediction, FieldsAndClipping) {
  const FloryPrediction p1 = flory_index(0.3, 1);
  EXPECT_DOUBLE_EQ(p1.nu_one_dim, 2.6 / 3.0);
  EXPECT_DOUBLE_EQ(p1.nu_clipped, p1.nu);

  const FloryPrediction p2 = flory_index(0.75, 1);
  EXPECT_GT(p2.nu, 1.0);
  EXPECT_DOUBLE_EQ(p2.nu_clipped, 1.0);
  EXPECT_DOUBLE_EQ(p2.nu_one_dim, 1.0);

  const FloryPrediction p3 = flory_index(0.4, 3);
  EXPECT_TRUE(std::isnan(p3.nu_one_dim));
  EXPECT_DOUBLE_EQ(p3.critical_dim, 5.0);
}

TEST(EndDensity, KnownValueAndNormalization) {
  const double expected = std::pow(4.0 * std::numbers::pi, -0.5) * std::exp(-0.25);
  EXPECT_NEAR(gaussian_end_density(1.0, 2.0, 0.5, 1), expected, 1e-16);
  EXPECT_NEAR(gaussian_end_density(1.0, 2.0, 0.5, 1), 0.21970, 1e-5);

  // radial quadrature of the density integrates to 1
  const double h = 0.7, n_horizon = 3.0;
  const double sigma = std::pow(n_horizon, h);
  const double dr = sigma / 4000.0;
  double mass1 = 0.0, mass2 = 0.0;
  for (int i = 0; i < 40000; ++i) {
    const double r = (i + 0.5) * dr;
    mass1 += 2.0 * gaussian_end_density(r, n_horizon, h, 1) * dr;
    mass2 += 2.0 * std::numbers::pi * r * gaussian_end_density(r, n_horizon, h, 2) * dr;
  }
  EXPECT_NEAR(mass1, 1.0, 1e-6);
  EXPECT_NEAR(mass2, 1.0, 1e-6);

  EXPECT_THROW(gaussian_end_density(1.0, 0.0, 0.5, 1), std::domain_error);
  EXPECT_THROW(gaussian_end_density(-1.0, 2.0, 0.5, 1), std::domain_error);
  EXPECT_THROW(gaussian_end_density(1.0, 2.0, 0.5, 0), std::invalid_argument);
}

TEST(Recursion, InvariantRatioOnInterpolationGrid) {
  for (int hi = 1; hi <= 19; ++hi) {
    const double h = 0.05 * hi;
    for (int d = 1; d <= 19; ++d) {
      if (h * d >= 2.0 - kRegimeTol) continue;
      const double nu = flory_index_value(h, static_cast<double>(d));
      EXPECT_NEAR(recursion_invariant(nu, h, static_cast<double>(d)), 1.0 / (2.0 * h + 2.0),
                  1e-12)
          << "h=" << h << " d=" << d;
    }
  }
}

TEST(Recursion, ExtrapolationReproducesInterpolation) {
  for (int hi = 1; hi <= 19; ++hi) {
    const double h = 0.05 * hi;
    const double nu1 = (2.0 * h + 2.0) / 3.0;
    for (int d = 1; d <= 19; ++d) {
      if (h * d >= 2.0 - kRegimeTol) continue;
      EXPECT_NEAR(recursion_extrapolate(nu1, h, static_cast<double>(d)),
                  (2.0 * h + 2.0) / (d + 2.0), 1e-12)
          << "h=" << h << " d=" << d;
    }
  }
  EXPECT_DOUBLE_EQ(recursion_extrapolate(1.0, 0.5, 3.0), 0.6);
}

TEST(Recursion, CriticalDimensionFixedPointForAnySeed) {
  // at d = 2/h the recursion forgets its seed and returns the free exponent
  Rng rng({2026, 0});
  for (double h : {0.25, 0.5, 0.75}) {
    for (int k = 0; k < 20; ++k) {
      const double nu1 = 1e-6 + 2.0 * rng.uniform01();
      EXPECT_NEAR(critical_regime_fixed_point_check(nu1, h), 0.0, 1e-12)
          << "h=" << h << " nu1=" << nu1;
    }
  }
}

TEST(Recursion, KosmasFreedConsistency) {
  for (int d = 1; d <= 4; ++d)
    EXPECT_NEAR(kosmas_freed_residual(1.0, 3.0 / (d + 2.0), static_cast<double>(d)), 0.0, 1e-12);
  EXPECT_NEAR(kosmas_freed_residual(1.0, 0.7, 2.0), -2.0 / 21.0, 1e-15);
  EXPECT_THROW(kosmas_freed_residual(0.0, 0.6, 3.0), std::domain_error);
  EXPECT_THROW(kosmas_freed_residual(1.0, 0.0, 3.0), std::domain_error);
}

TEST(Recursion, ErrorPaths) {
  EXPECT_THROW(recursion_invariant(0.0, 0.5, 3.0), std::domain_error);
  EXPECT_THROW(recursion_invariant(0.6, 0.5, 4.0), std::domain_error);
  EXPECT_THROW(recursion_extrapolate(-1.0, 0.5, 3.0), std::invalid_argument);
  EXPECT_THROW(recursion_extrapolate(0.35, 0.9, 3.0), std::domain_error);
}

TEST(Interpolation, AnchorConstraintsAdmitSeveralFormulas) {
  const auto main_res =
      interpolation_constraints_check([](double h) { return flory_index_value(h, 3.0); }, 3.0);
  EXPECT_NEAR(main_res.first, 0.0, 1e-15);
  EXPECT_NEAR(main_res.second, 0.0, 1e-15);

  const auto alt_res = interpolation_constraints_check(
      [](double h) { return flory_index_alt_value(h, 3.0); }, 3.0);
  EXPECT_NEAR(alt_res.first, 0.0, 1e-15);
  EXPECT_NEAR(alt_res.second, 0.0, 1e-15);

  // a constant fails the critical-dimension anchor, so the checker has teeth
  const auto const_res = interpolation_constraints_check([](double) { return 0.6; }, 3.0);
  EXPECT_NEAR(const_res.first, 0.0, 1e-15);
  EXPECT_GT(std::abs(const_res.second), 0.05);

  EXPECT_THROW(interpolation_constraints_check([](double h) { return h; }, 2.0),
               std::domain_error);
}

TEST(Interpolation, AltFormulaIsRecursionSeededAtBallistic) {
  for (double h : {0.2, 0.45, 0.7})
    for (int d = 2; d <= 6; ++d)
      EXPECT_DOUBLE_EQ(flory_index_alt_value(h, d), recursion_extrapolate(1.0, h, d));
  // d + 1 - d h vanishes only at d = -1/(1 - h); the guard still covers it
  EXPECT_THROW(flory_index_alt_value(0.5, -2.0), std::domain_error);
}

TEST(SlabAndCrossover, ExponentsAreDimensionOnly) {
  EXPECT_NEAR(slab_exponent_y(0.5, 3.0), 0.5, 1e-15);
  EXPECT_NEAR(crossover_exponent_x(0.5, 3.0), 0.4, 1e-15);
  // the interpolation makes both exponents independent of h
  for (double h : {0.2, 0.5, 0.8})
    for (int d = 2; d <= 8; ++d) {
      EXPECT_NEAR(slab_exponent_y(h, d), 2.0 / (d + 1.0), 1e-14) << "h=" << h << " d=" << d;
      if (std::abs(2.0 - h * d) > kRegimeTol)
        EXPECT_NEAR(crossover_exponent_x(h, d), 2.0 / (d + 2.0), 1e-13)
            << "h=" << h << " d=" << d;
    }
  EXPECT_THROW(slab_exponent_y(0.5, 1.0), std::domain_error);
  EXPECT_THROW(crossover_exponent_x(0.5, 4.0), std::domain_error);
}

TEST(RecursionDiagnostics, BundleIsSelfConsistent) {
  const RecursionDiagnostics diag = recursion_diagnostics(0.5, 3.0);
  EXPECT_DOUBLE_EQ(diag.nu, 0.6);
  EXPECT_NEAR(diag.invariant_value, diag.invariant_expected, 1e-12);
  EXPECT_DOUBLE_EQ(diag.invariant_expected, 1.0 / 3.0);
  EXPECT_NEAR(diag.extrapolated_nu, 0.6, 1e-15);
  EXPECT_NEAR(diag.slab_y, 0.5, 1e-15);
  EXPECT_NEAR(diag.crossover_x, 0.4, 1e-15);

  const RecursionDiagnostics one_dim = recursion_diagnostics(0.4, 1.0);
  EXPECT_TRUE(std::isnan(one_dim.slab_y));
}
