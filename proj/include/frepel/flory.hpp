#pragma once

// Closed-form mean-field analytics for the repulsive fBm path model:
// the swelling-exponent interpolation nu_H(d) = (2H + 2)/(d + 2), the
// regime map it lives on, and the consistency identities (dimensional
// recursion, invariant ratio, fixed points) that the simulation side is
// tested against. Everything here is exact arithmetic on closed forms;
// no sampling.

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace frepel {

/// Tolerance for regime boundaries. Products like h * d land on the
/// boundaries 1 and 2 only up to rounding (e.g. h = 1/3, d = 3), so the
/// classifier treats |h*d - boundary| <= kRegimeTol as on the boundary.
inline constexpr double kRegimeTol = 1e-12;

// ---------------------------------------------------------------- regimes ----

enum class RegimeLabel {
  edwards_well_defined,      // h < 1/d: pair density integrable, model well posed
  edwards_critical,          // h = 1/d
  double_points_present,     // 1/d < h < 2/d: self-intersections exist but model is singular
  no_double_points,          // h >= 2/d: paths self-avoid on their own
  above_critical_dimension,  // d >= 2/h; same locus as no_double_points, kept for maps
  flory_unphysical_nu,       // interpolated nu exceeds 1 (ballistic bound violated)
};

inline const char* regime_label_name(RegimeLabel label) {
  switch (label) {
    case RegimeLabel::edwards_well_defined: return "edwards-well-defined";
    case RegimeLabel::edwards_critical: return "edwards-critical";
    case RegimeLabel::double_points_present: return "double-points-present";
    case RegimeLabel::no_double_points: return "no-double-points";
    case RegimeLabel::above_critical_dimension: return "above-critical-dimension";
    case RegimeLabel::flory_unphysical_nu: return "flory-unphysical-nu";
  }
  return "unknown";
}

// ------------------------------------------------------------ core formulas ----

/// Raw interpolation value, defined for real h in (0,1) and real d > 0.
inline double flory_index_value(double h, double d) {
  if (!(h > 0.0 && h < 1.0))
    throw std::domain_error("flory_index_value: h must lie in (0, 1)");
  if (!(d > 0.0)) throw std::domain_error("flory_index_value: d must be positive");
  return (2.0 * h + 2.0) / (d + 2.0);
}

/// Alternative interpolation (2 - h)/(d + 1 - d h). Matches the main
/// formula at the two anchor constraints but differs in between; kept so
/// the non-uniqueness of the interpolation is checkable.
inline double flory_index_alt_value(double h, double d) {
  if (!(h > 0.0 && h < 1.0))
    throw std::domain_error("flory_index_alt_value: h must lie in (0, 1)");
  const double denom = d + 1.0 - d * h;
  if (std::abs(denom) <= kRegimeTol)
    throw std::domain_error("flory_index_alt_value: denominator vanishes");
  return (2.0 - h) / denom;
}

/// Dimension above which self-intersections vanish: d_c = 2/h.
inline double critical_dimension(double h) {
  if (!(h > 0.0 && h < 1.0))
    throw std::domain_error("critical_dimension: h must lie in (0, 1)");
  return 2.0 / h;
}

/// Sharper one-dimensional value: (2h + 2)/3 for h <= 1/2, ballistic
/// (nu = 1) beyond. Coincides with the interpolation at h = 1/2.
inline double flory_index_one_dim(double h) {
  if (!(h > 0.0 && h < 1.0))
    throw std::domain_error("flory_index_one_dim: h must lie in (0, 1)");
  return h <= 0.5 ? (2.0 * h + 2.0) / 3.0 : 1.0;
}

inline std::vector<RegimeLabel> classify_regime(double h, double d) {
  if (!(h > 0.0 && h < 1.0))
    throw std::domain_error("classify_regime: h must lie in (0, 1)");
  if (!(d > 0.0)) throw std::domain_error("classify_regime: d must be positive");
  const double hd = h * d;
  std::vector<RegimeLabel> labels;
  if (hd < 1.0 - kRegimeTol) labels.push_back(RegimeLabel::edwards_well_defined);
  if (std::abs(hd - 1.0) <= kRegimeTol) labels.push_back(RegimeLabel::edwards_critical);
  if (hd > 1.0 + kRegimeTol && hd < 2.0 - kRegimeTol)
    labels.push_back(RegimeLabel::double_points_present);
  if (hd >= 2.0 - kRegimeTol) {
    labels.push_back(RegimeLabel::no_double_points);
    labels.push_back(RegimeLabel::above_critical_dimension);
  }
  if (flory_index_value(h, d) > 1.0 + kRegimeTol)
    labels.push_back(RegimeLabel::flory_unphysical_nu);
  return labels;
}

// ----------------------------------------------------------- prediction ----

struct FloryPrediction {
  double h = 0.0;
  double d = 0.0;
  double nu = 0.0;            // raw interpolation value
  double nu_clipped = 0.0;    // min(nu, 1), the physically meaningful report
  double nu_one_dim = 0.0;    // piecewise d = 1 value; NaN unless d == 1
  double critical_dim = 0.0;  // 2/h
  std::vector<RegimeLabel> regime;
};

inline FloryPrediction flory_index(double h, int d) {
  if (d < 1) throw std::invalid_argument("flory_index: d must be >= 1");
  FloryPrediction p;
  p.h = h;
  p.d = static_cast<double>(d);
  p.nu = flory_index_value(h, p.d);
  p.nu_clipped = std::min(p.nu, 1.0);
  p.nu_one_dim = d == 1 ? flory_index_one_dim(h) : std::nan("");
  p.critical_dim = critical_dimension(h);
  p.regime = classify_regime(h, p.d);
  return p;
}

// ------------------------------------------------------------ end density ----

/// Free-path endpoint density at radius R after horizon N:
/// (2 pi N^{2H})^{-d/2} exp(-R^2 / (2 N^{2H})).
inline double gaussian_end_density(double r, double n_horizon, double h, int d) {
  if (!(n_horizon > 0.0)) throw std::domain_error("gaussian_end_density: N must be > 0");
  if (r < 0.0) throw std::domain_error("gaussian_end_density: R must be >= 0");
  if (d < 1) throw std::invalid_argument("gaussian_end_density: d must be >= 1");
  const double var = std::pow(n_horizon, 2.0 * h);
  return std::pow(2.0 * std::numbers::pi * var, -0.5 * d) * std::exp(-r * r / (2.0 * var));
}

// ----------------------------------------------------- recursion identities ----

/// Dimensional recursion seeded at d = 1:
/// nu(d) = (2 - h) nu1 / ((d - 1) nu1 + 2 - d h). Real d is allowed.
inline double recursion_extrapolate(double nu1, double h, double d) {
  if (!(nu1 > 0.0)) throw std::invalid_argument("recursion_extrapolate: nu1 must be > 0");
  const double denom = (d - 1.0) * nu1 + 2.0 - d * h;
  if (std::abs(denom) <= kRegimeTol)
    throw std::domain_error("recursion_extrapolate: denominator vanishes");
  return (2.0 - h) * nu1 / denom;
}

/// Invariant ratio (1/nu)(nu - h)/(2 - h d); on the interpolation it equals
/// 1/(2h + 2) for every d.
inline double recursion_invariant(double nu, double h, double d) {
  if (std::abs(nu) <= kRegimeTol)
    throw std::domain_error("recursion_invariant: nu must be nonzero");
  const double denom = 2.0 - h * d;
  if (std::abs(denom) <= kRegimeTol)
    throw std::domain_error("recursion_invariant: h*d = 2 is outside the identity's domain");
  return (nu - h) / (nu * denom);
}

/// Residual of the classical three-parameter consistency relation
/// (2 - 1/nu(d)) - ((4 - d)/3)(2 - 1/nu(1)); zero at h = 1/2 for d <= 4.
inline double kosmas_freed_residual(double nu1, double nud, double d) {
  if (std::abs(nu1) <= kRegimeTol || std::abs(nud) <= kRegimeTol)
    throw std::domain_error("kosmas_freed_residual: exponents must be nonzero");
  return (2.0 - 1.0 / nud) - ((4.0 - d) / 3.0) * (2.0 - 1.0 / nu1);
}

/// At the critical dimension d = 2/h the recursion must return the free
/// exponent; this residual (extrapolated nu minus h) is zero when the
/// seed nu1 comes from the interpolation itself.
inline double critical_regime_fixed_point_check(double nu1, double h) {
  if (!(h > 0.0 && h < 1.0))
    throw std::domain_error("critical_regime_fixed_point_check: h must lie in (0, 1)");
  return recursion_extrapolate(nu1, h, critical_dimension(h)) - h;
}

/// Residuals of the two anchor constraints any candidate interpolation
/// F : h -> nu(d) must satisfy for fixed d: the h = 1/2 classical value and
/// the critical-dimension value F(2/d) = 2/d. Both residuals zero does not
/// single out one formula; see flory_index_alt_value.
template <typename F>
std::pair<double, double> interpolation_constraints_check(F&& candidate, double d) {
  if (!(d > 2.0))
    throw std::domain_error("interpolation_constraints_check: need d > 2 so 2/d is in (0, 1)");
  const double at_half = candidate(0.5) - 3.0 / (d + 2.0);
  const double at_critical = candidate(2.0 / d) - 2.0 / d;
  return {at_half, at_critical};
}

// -------------------------------------------------------- slab exponents ----

/// Predicted slab swelling exponent y from the dimensional reduction
/// <R^2>_D ~ <R^2> (D / sqrt(<R^2>))^{-y} with 1 + y/2 = nu(d-1)/nu(d):
/// squeezing one coordinate into a slab pushes growth toward the (d-1)-
/// dimensional exponent. y = 0 at g = 0 (both sides Gaussian).
inline double slab_exponent_y(double h, double d) {
  if (!(d > 1.0)) throw std::domain_error("slab_exponent_y: need d > 1");
  return 2.0 * (flory_index_value(h, d - 1.0) / flory_index_value(h, d) - 1.0);
}

/// Crossover exponent x = (2 nu - 2h)/(2 - h d) appearing in the strong-
/// coupling scaling of the end density; undefined at h d = 2.
inline double crossover_exponent_x(double h, double d) {
  const double denom = 2.0 - h * d;
  if (std::abs(denom) <= kRegimeTol)
    throw std::domain_error("crossover_exponent_x: h*d = 2 is outside the domain");
  return (2.0 * flory_index_value(h, d) - 2.0 * h) / denom;
}

struct RecursionDiagnostics {
  double h = 0.0;
  double d = 0.0;
  double nu = 0.0;
  double invariant_value = 0.0;
  double invariant_expected = 0.0;  // 1/(2h + 2)
  double extrapolated_nu = 0.0;     // recursion seeded at the d = 1 interpolation value
  double slab_y = 0.0;              // NaN for d <= 1
  double crossover_x = 0.0;
};

inline RecursionDiagnostics recursion_diagnostics(double h, double d) {
  RecursionDiagnostics out;
  out.h = h;
  out.d = d;
  out.nu = flory_index_value(h, d);
  out.invariant_value = recursion_invariant(out.nu, h, d);
  out.invariant_expected = 1.0 / (2.0 * h + 2.0);
  out.extrapolated_nu = recursion_extrapolate(flory_index_value(h, 1.0), h, d);
  out.slab_y = d > 1.0 ? slab_exponent_y(h, d) : std::nan("");
  out.crossover_x = crossover_exponent_x(h, d);
  return out;
}

}  // namespace frepel
