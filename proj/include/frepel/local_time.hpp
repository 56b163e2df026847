#pragma once

// Mollified self-intersection local time of a discrete path and the
// repulsion energy g * L built on it. The mollifier is an isotropic
// Gaussian of width epsilon; the discrete local time is the Riemann sum
//
//   L = dt^2 * sum over ordered pairs (i, j) of delta_eps(x_i - x_j),
//
// diagonal terms i == j excluded by default (they add the constant
// n * dt^2 * (2 pi eps)^{-d/2}, pure bookkeeping). Summation runs in fixed
// row-major pair order with compensated accumulation, so equal inputs give
// bit-equal results.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "frepel/fbm.hpp"

namespace frepel {

// ---------------------------------------------------------------- types ----

/// Gaussian mollifier width (the variance parameter), strictly positive.
struct MollifierWidth {
  double epsilon;

  explicit MollifierWidth(double value) : epsilon(value) {
    if (!(value > 0.0))
      throw std::invalid_argument("MollifierWidth: epsilon must be > 0, got " +
                                  std::to_string(value));
  }
};

/// Repulsion strength g >= 0. g = 0 recovers the free path measure.
struct CouplingConstant {
  double g;

  explicit CouplingConstant(double value) : g(value) {
    if (!(value >= 0.0))
      throw std::invalid_argument("CouplingConstant: g must be >= 0, got " +
                                  std::to_string(value));
  }
};

/// Local time plus the energy g * local_time it induces.
struct EnergyReport {
  double local_time = 0.0;
  double energy = 0.0;
  double g = 0.0;
  double epsilon = 0.0;
  bool diagonal_included = false;
};

// ------------------------------------------------------------- mollifier ----

/// Isotropic Gaussian kernel (2 pi eps)^{-d/2} exp(-|x|^2 / (2 eps)).
inline double mollified_delta(std::span<const double> x, MollifierWidth width) {
  double sq = 0.0;
  for (double v : x) sq += v * v;
  const double d = static_cast<double>(x.size());
  return std::pow(2.0 * std::numbers::pi * width.epsilon, -0.5 * d) *
         std::exp(-sq / (2.0 * width.epsilon));
}

namespace detail {

struct KahanSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double v) {
    const double y = v - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

inline double pair_exponent_sum(const double* pos, std::size_t n_points, int dim,
                                double inv_two_eps, bool diagonal_included) {
  KahanSum acc;
  for (std::size_t i = 0; i < n_points; ++i) {
    const double* xi = pos + i * static_cast<std::size_t>(dim);
    for (std::size_t j = 0; j < n_points; ++j) {
      if (!diagonal_included && i == j) continue;
      const double* xj = pos + j * static_cast<std::size_t>(dim);
      double sq = 0.0;
      for (int c = 0; c < dim; ++c) {
        const double dx = xi[c] - xj[c];
        sq += dx * dx;
      }
      acc.add(std::exp(-sq * inv_two_eps));
    }
  }
  return acc.sum;
}

}  // namespace detail

// -------------------------------------------------------------- local time ----

/// Core entry point on a raw position buffer: n_points rows of dim
/// coordinates, grid spacing dt. Works for any n_points >= 1 (a 2-point
/// "path" is a legitimate degenerate input).
inline double local_time_from_points(const double* pos, std::size_t n_points, int dim,
                                     double dt, MollifierWidth width,
                                     bool diagonal_included = false) {
  if (dim < 1) throw std::invalid_argument("local_time_from_points: dim must be >= 1");
  const double pref =
      std::pow(2.0 * std::numbers::pi * width.epsilon, -0.5 * static_cast<double>(dim));
  const double exps =
      detail::pair_exponent_sum(pos, n_points, dim, 0.5 / width.epsilon, diagonal_included);
  return dt * dt * pref * exps;
}

/// Local time of a sampled path. Returns a free-case report (g = 0); use
/// energy() or energy_report() to attach a coupling.
inline EnergyReport local_time(const PathBundle& path, MollifierWidth width,
                               bool diagonal_included = false) {
  const double value = local_time_from_points(
      path.positions.data(), static_cast<std::size_t>(path.grid.n_steps) + 1,
      path.dimension, path.grid.dt(), width, diagonal_included);
  return EnergyReport{value, 0.0, 0.0, width.epsilon, diagonal_included};
}

inline double energy(CouplingConstant g, double local_time_value) {
  if (!(local_time_value >= 0.0))
    throw std::domain_error("energy: local time must be >= 0");
  return g.g * local_time_value;
}

inline EnergyReport energy_report(const PathBundle& path, MollifierWidth width,
                                  CouplingConstant g, bool diagonal_included = false) {
  EnergyReport report = local_time(path, width, diagonal_included);
  report.g = g.g;
  report.energy = energy(g, report.local_time);
  return report;
}

/// Exact change in local time when the single path point k moves to
/// new_point, O(n) instead of a full O(n^2) recomputation. The moved row
/// interacts with every other row once in each pair order, hence the
/// factor 2; the diagonal term is unchanged by a move.
inline double local_time_delta(const PathBundle& path, MollifierWidth width,
                               std::size_t k, std::span<const double> new_point,
                               bool diagonal_included = false) {
  const std::size_t n_points = static_cast<std::size_t>(path.grid.n_steps) + 1;
  if (k >= n_points)
    throw std::out_of_range("local_time_delta: point index " + std::to_string(k) +
                            " out of range");
  if (new_point.size() != static_cast<std::size_t>(path.dimension))
    throw std::invalid_argument("local_time_delta: new_point has wrong dimension");
  (void)diagonal_included;  // diagonal contribution cancels in the difference
  const int dim = path.dimension;
  const double inv_two_eps = 0.5 / width.epsilon;
  const double* old_point = path.positions.data() + k * static_cast<std::size_t>(dim);
  detail::KahanSum acc;
  for (std::size_t j = 0; j < n_points; ++j) {
    if (j == k) continue;
    const double* xj = path.positions.data() + j * static_cast<std::size_t>(dim);
    double sq_new = 0.0, sq_old = 0.0;
    for (int c = 0; c < dim; ++c) {
      const double dn = new_point[c] - xj[c];
      const double doo = old_point[c] - xj[c];
      sq_new += dn * dn;
      sq_old += doo * doo;
    }
    acc.add(std::exp(-sq_new * inv_two_eps) - std::exp(-sq_old * inv_two_eps));
  }
  const double dt = path.grid.dt();
  const double pref =
      std::pow(2.0 * std::numbers::pi * width.epsilon, -0.5 * static_cast<double>(dim));
  return 2.0 * dt * dt * pref * acc.sum;
}

/// L_eps along a ladder of widths for one fixed path. Continuity in eps on
/// a fixed path makes this the cheap diagnostic for mollifier sensitivity.
inline std::vector<double> local_time_profile(const PathBundle& path,
                                              const std::vector<double>& widths,
                                              bool diagonal_included = false) {
  std::vector<double> out;
  out.reserve(widths.size());
  for (double eps : widths)
    out.push_back(local_time(path, MollifierWidth(eps), diagonal_included).local_time);
  return out;
}

}  // namespace frepel
