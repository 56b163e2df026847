#pragma once

// Exact-in-law sampling of fractional Brownian motion on a uniform grid.
// Two engines: dense Cholesky on the increment covariance (reference,
// O(n^2) per path after an O(n^3) setup) and circulant embedding of the
// stationary increment process (O(n log n) per path). Both consume the
// deterministic Rng in a documented draw order, so paths are reproducible
// bit-for-bit from (seed, stream_id).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "frepel/errors.hpp"
#include "frepel/rng.hpp"

namespace frepel {

// ---------------------------------------------------------------- types ----

/// Hurst exponent, open interval (0, 1). h = 1/2 is ordinary Brownian motion.
struct HurstParameter {
  double h;

  explicit HurstParameter(double value) : h(value) {
    if (!(value > 0.0 && value < 1.0))
      throw std::invalid_argument("HurstParameter: h must lie in (0, 1), got " +
                                  std::to_string(value));
  }
};

/// Uniform time grid 0 = t_0 < t_1 < ... < t_n = horizon.
struct TimeGrid {
  std::int64_t n_steps;
  double horizon;

  TimeGrid(std::int64_t steps, double horizon_in) : n_steps(steps), horizon(horizon_in) {
    if (steps < 2)
      throw std::invalid_argument("TimeGrid: need at least 2 steps, got " +
                                  std::to_string(steps));
    if (!(horizon_in > 0.0) || !std::isfinite(horizon_in))
      throw std::invalid_argument("TimeGrid: horizon must be positive and finite");
  }

  double dt() const { return horizon / static_cast<double>(n_steps); }
  double time(std::int64_t k) const { return dt() * static_cast<double>(k); }
};

/// One sampled path: positions of all d coordinates at the n_steps + 1 grid
/// points, row-major (point index major, coordinate minor). Starts at the
/// origin by construction.
struct PathBundle {
  HurstParameter hurst;
  TimeGrid grid;
  int dimension;
  std::vector<double> positions;  // (n_steps + 1) * dimension

  double position(std::int64_t k, int coord) const {
    return positions[static_cast<std::size_t>(k) * dimension + coord];
  }

  /// Squared end-to-end displacement |x(horizon) - x(0)|^2.
  double end_to_end_sq() const {
    double r2 = 0.0;
    const std::size_t last = static_cast<std::size_t>(grid.n_steps) * dimension;
    for (int c = 0; c < dimension; ++c) {
      const double dx = positions[last + c] - positions[c];
      r2 += dx * dx;
    }
    return r2;
  }
};

/// Autocovariance gamma(k) of the increment process on a given grid,
/// k = 0 .. n_steps - 1.
struct FgnAutocovariance {
  HurstParameter hurst;
  double dt;
  std::vector<double> values;
};

// ------------------------------------------------------ covariance kernels ----

/// Covariance of one fBm coordinate: (t^{2H} + s^{2H} - |t - s|^{2H}) / 2.
inline double fbm_covariance(HurstParameter hurst, double s, double t) {
  if (s < 0.0 || t < 0.0)
    throw std::domain_error("fbm_covariance: times must be nonnegative");
  const double two_h = 2.0 * hurst.h;
  return 0.5 * (std::pow(t, two_h) + std::pow(s, two_h) - std::pow(std::abs(t - s), two_h));
}

/// Increment autocovariance at integer lag k on a grid of spacing dt:
/// gamma(k) = dt^{2H} (|k+1|^{2H} - 2|k|^{2H} + |k-1|^{2H}) / 2.
/// Equals the second difference of fbm_covariance along one row.
inline double fgn_autocovariance_at(HurstParameter hurst, double dt, std::int64_t lag) {
  const double two_h = 2.0 * hurst.h;
  const double k = static_cast<double>(lag < 0 ? -lag : lag);
  const double second_diff = std::pow(k + 1.0, two_h) - 2.0 * std::pow(k, two_h) +
                             std::pow(std::abs(k - 1.0), two_h);
  return 0.5 * std::pow(dt, two_h) * second_diff;
}

inline FgnAutocovariance fgn_autocovariance(HurstParameter hurst, const TimeGrid& grid) {
  FgnAutocovariance out{hurst, grid.dt(), {}};
  out.values.resize(static_cast<std::size_t>(grid.n_steps));
  for (std::int64_t k = 0; k < grid.n_steps; ++k)
    out.values[static_cast<std::size_t>(k)] = fgn_autocovariance_at(hurst, grid.dt(), k);
  return out;
}

// ---------------------------------------------------------------- detail ----

namespace detail {

/// In-place lower Cholesky of a row-major n x n matrix. Returns -1 on
/// success, otherwise the 0-based index of the first non-positive pivot
/// (the order of the offending leading minor). Upper triangle is zeroed.
inline std::ptrdiff_t cholesky_lower_in_place(std::vector<double>& a, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    double diag = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) diag -= a[j * n + k] * a[j * n + k];
    if (!(diag > 0.0)) return static_cast<std::ptrdiff_t>(j);
    const double ljj = std::sqrt(diag);
    a[j * n + j] = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = s / ljj;
    }
    for (std::size_t k = j + 1; k < n; ++k) a[j * n + k] = 0.0;
  }
  return -1;
}

inline void cumulative_sum_into_positions(const std::vector<double>& increments,
                                          std::int64_t n, int d, int coord,
                                          std::vector<double>& positions) {
  double acc = 0.0;
  positions[static_cast<std::size_t>(coord)] = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    acc += increments[static_cast<std::size_t>(i)];
    positions[static_cast<std::size_t>(i + 1) * d + coord] = acc;
  }
}

}  // namespace detail

// ------------------------------------------------------- Cholesky sampler ----

struct CholeskyOptions {
  /// On a failed factorization, retry once with ridge * gamma(0) added to
  /// the diagonal before giving up.
  bool jitter_on_failure = false;
  double jitter_ridge = 1e-12;
};

/// Exact fBm sampler from the dense increment covariance. The factor is
/// built once per (h, grid); each path costs one O(n^2) triangular
/// multiply per coordinate. Draw order per path: coordinate 0's n normals,
/// then coordinate 1's, and so on.
class CholeskySampler {
 public:
  CholeskySampler(HurstParameter hurst, TimeGrid grid, int dimension,
                  CholeskyOptions options = {})
      : hurst_(hurst), grid_(grid), dimension_(dimension) {
    if (dimension < 1)
      throw std::invalid_argument("CholeskySampler: dimension must be >= 1");
    const std::size_t n = static_cast<std::size_t>(grid.n_steps);
    const FgnAutocovariance gamma = fgn_autocovariance(hurst, grid);
    factor_.resize(n * n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        factor_[i * n + j] = gamma.values[i > j ? i - j : j - i];
    std::ptrdiff_t bad = detail::cholesky_lower_in_place(factor_, n);
    if (bad >= 0 && options.jitter_on_failure) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          factor_[i * n + j] = gamma.values[i > j ? i - j : j - i];
      const double ridge = options.jitter_ridge * gamma.values[0];
      for (std::size_t i = 0; i < n; ++i) factor_[i * n + i] += ridge;
      jitter_applied_ = ridge;
      bad = detail::cholesky_lower_in_place(factor_, n);
    }
    if (bad >= 0) {
      char msg[160];
      std::snprintf(msg, sizeof msg,
                    "Cholesky factorization failed: leading minor of order %td is not "
                    "positive definite (h=%.6g, n=%lld)",
                    bad + 1, hurst.h, static_cast<long long>(grid.n_steps));
      throw NumericalError(msg);
    }
  }

  const TimeGrid& grid() const { return grid_; }
  HurstParameter hurst() const { return hurst_; }
  int dimension() const { return dimension_; }
  double jitter_applied() const { return jitter_applied_; }

  /// Lower-triangular factor L with L L^T = Toeplitz(gamma), row-major n x n.
  const std::vector<double>& factor() const { return factor_; }

  /// Maps one coordinate's noise vector (n entries) to its increments.
  void increments_from_noise(std::span<const double> z, std::vector<double>& out) const {
    const std::size_t n = static_cast<std::size_t>(grid_.n_steps);
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k <= i; ++k) s += factor_[i * n + k] * z[k];
      out[i] = s;
    }
  }

  /// Rebuilds a full position table from coordinate-major noise
  /// (z[c * n + i]). Used by the noise-space chain.
  void positions_from_noise(std::span<const double> z, std::vector<double>& positions) const {
    const std::size_t n = static_cast<std::size_t>(grid_.n_steps);
    positions.assign((n + 1) * static_cast<std::size_t>(dimension_), 0.0);
    std::vector<double> inc;
    for (int c = 0; c < dimension_; ++c) {
      increments_from_noise(z.subspan(static_cast<std::size_t>(c) * n, n), inc);
      detail::cumulative_sum_into_positions(inc, grid_.n_steps, dimension_, c, positions);
    }
  }

  PathBundle sample(Rng& rng) const {
    const std::size_t n = static_cast<std::size_t>(grid_.n_steps);
    PathBundle path{hurst_, grid_, dimension_, {}};
    path.positions.assign((n + 1) * static_cast<std::size_t>(dimension_), 0.0);
    std::vector<double> z(n), inc;
    for (int c = 0; c < dimension_; ++c) {
      for (std::size_t i = 0; i < n; ++i) z[i] = rng.normal();
      increments_from_noise(z, inc);
      detail::cumulative_sum_into_positions(inc, grid_.n_steps, dimension_, c, path.positions);
    }
    return path;
  }

 private:
  HurstParameter hurst_;
  TimeGrid grid_;
  int dimension_;
  std::vector<double> factor_;
  double jitter_applied_ = 0.0;
};

// ------------------------------------------------------ circulant sampler ----

struct CirculantOptions {
  /// Negative embedding eigenvalues below -tolerance * max_eigenvalue are a
  /// hard error unless clamping is enabled; clamping truncates them at zero
  /// and records a sup-norm bound on the induced covariance error.
  bool clamp_negative_eigenvalues = false;
  double tolerance = 1e-10;
};

/// Exact fBm sampler via circulant embedding of the increment covariance
/// (size m = 2n). Increments are the first n outputs of an FFT applied to
/// Gaussian spectral amplitudes. Draw order per coordinate: the k = 0
/// amplitude, then (U_k, V_k) pairs for k = 1 .. m/2 - 1, then the k = m/2
/// amplitude; m normals per coordinate in total.
class CirculantSampler {
 public:
  CirculantSampler(HurstParameter hurst, TimeGrid grid, int dimension,
                   CirculantOptions options = {})
      : hurst_(hurst), grid_(grid), dimension_(dimension) {
    if (dimension < 1)
      throw std::invalid_argument("CirculantSampler: dimension must be >= 1");
    const std::size_t n = static_cast<std::size_t>(grid.n_steps);
    const std::size_t m = 2 * n;
    std::vector<double> first_row(m);
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t lag = j <= n ? j : m - j;
      first_row[j] = fgn_autocovariance_at(hurst, grid.dt(), static_cast<std::int64_t>(lag));
    }
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> spectrum(m);
    fft.fwd(spectrum, first_row);
    eigenvalues_.resize(m);
    min_eigenvalue_ = std::numeric_limits<double>::infinity();
    double max_eig = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      eigenvalues_[j] = spectrum[j].real();
      min_eigenvalue_ = std::min(min_eigenvalue_, eigenvalues_[j]);
      max_eig = std::max(max_eig, eigenvalues_[j]);
    }
    const double floor = -options.tolerance * max_eig;
    double clamped_mass = 0.0;
    for (double& lambda : eigenvalues_) {
      if (lambda >= 0.0) continue;
      if (lambda < floor && !options.clamp_negative_eigenvalues) {
        char msg[160];
        std::snprintf(msg, sizeof msg,
                      "circulant embedding is not nonnegative definite: min eigenvalue "
                      "%.6g (h=%.6g, n=%lld)",
                      min_eigenvalue_, hurst.h, static_cast<long long>(grid.n_steps));
        throw NumericalError(msg);
      }
      clamped_mass += -lambda;
      lambda = 0.0;
    }
    covariance_error_bound_ = clamped_mass / static_cast<double>(m);

    // Pre-scaled amplitude coefficients; the 1/m from the inverse transform
    // is folded in so sampling applies a plain forward FFT.
    coef_.resize(m / 2 + 1);
    const double dm = static_cast<double>(m);
    coef_[0] = std::sqrt(eigenvalues_[0] / dm);
    coef_[m / 2] = std::sqrt(eigenvalues_[m / 2] / dm);
    for (std::size_t k = 1; k < m / 2; ++k) coef_[k] = std::sqrt(eigenvalues_[k] / (2.0 * dm));
  }

  const TimeGrid& grid() const { return grid_; }
  HurstParameter hurst() const { return hurst_; }
  int dimension() const { return dimension_; }
  double min_eigenvalue() const { return min_eigenvalue_; }
  /// Embedding eigenvalues (after any clamping), length 2 * n_steps; their
  /// inverse transform must reproduce the embedded autocovariance row.
  const std::vector<double>& embedding_eigenvalues() const { return eigenvalues_; }
  /// Zero unless eigenvalues were clamped; then a sup-norm bound on the
  /// distance between the sampled and target increment covariances.
  double covariance_error_bound() const { return covariance_error_bound_; }

  PathBundle sample(Rng& rng) const {
    const std::size_t n = static_cast<std::size_t>(grid_.n_steps);
    const std::size_t m = 2 * n;
    PathBundle path{hurst_, grid_, dimension_, {}};
    path.positions.assign((n + 1) * static_cast<std::size_t>(dimension_), 0.0);
    std::vector<std::complex<double>> amp(m);
    std::vector<std::complex<double>> transformed(m);
    std::vector<double> inc(n);
    Eigen::FFT<double> fft;
    for (int c = 0; c < dimension_; ++c) {
      amp[0] = {coef_[0] * rng.normal(), 0.0};
      for (std::size_t k = 1; k < m / 2; ++k) {
        const double u = rng.normal();
        const double v = rng.normal();
        amp[k] = {coef_[k] * u, coef_[k] * v};
        amp[m - k] = std::conj(amp[k]);
      }
      amp[m / 2] = {coef_[m / 2] * rng.normal(), 0.0};
      fft.fwd(transformed, amp);
      for (std::size_t i = 0; i < n; ++i) inc[i] = transformed[i].real();
      detail::cumulative_sum_into_positions(inc, grid_.n_steps, dimension_, c, path.positions);
    }
    return path;
  }

 private:
  HurstParameter hurst_;
  TimeGrid grid_;
  int dimension_;
  std::vector<double> eigenvalues_;
  std::vector<double> coef_;
  double min_eigenvalue_ = 0.0;
  double covariance_error_bound_ = 0.0;
};

// --------------------------------------------------------- rescale check ----

/// Moment comparison between paths on (n, N) and paths on (n, a * N)
/// rescaled by a^{-H}. Both arms consume the same streams, so a = 1 must
/// reproduce arm A bit-for-bit and any a keeps the comparison tight; the
/// analytic columns check each arm against Var x(t_k) = t_k^{2H}.
struct RescaleCheckReport {
  std::vector<double> times;             // t_1 .. t_n on the base grid
  std::vector<double> mean_a, mean_b;    // coordinate-pooled means
  std::vector<double> var_a, var_b;      // coordinate-pooled variances
  std::vector<double> z_mean_diff;       // (mean_a - mean_b) / combined SE
  std::vector<double> z_var_diff;        // (var_a - var_b) / combined SE
  std::vector<double> z_var_a_analytic;  // (var_a - t^{2H}) / SE
  std::vector<double> z_var_b_analytic;
  double max_abs_z_mean_diff = 0.0;
  double max_abs_z_var_diff = 0.0;
  double max_abs_z_analytic = 0.0;
};

inline RescaleCheckReport rescale_in_law_check(HurstParameter hurst, const TimeGrid& grid,
                                               int dimension, double a,
                                               std::int64_t n_replicas, RngStream rng) {
  if (!(a > 0.0)) throw std::invalid_argument("rescale_in_law_check: a must be positive");
  if (n_replicas < 2)
    throw std::invalid_argument("rescale_in_law_check: need at least 2 replicas");
  const TimeGrid scaled(grid.n_steps, grid.horizon * a);
  const double rescale = std::pow(a, -hurst.h);
  const CholeskySampler sampler_a(hurst, grid, dimension);
  const CholeskySampler sampler_b(hurst, scaled, dimension);

  const std::size_t n = static_cast<std::size_t>(grid.n_steps);
  const std::size_t cols = n * static_cast<std::size_t>(dimension);
  std::vector<double> sum_a(cols, 0.0), sumsq_a(cols, 0.0);
  std::vector<double> sum_b(cols, 0.0), sumsq_b(cols, 0.0);
  std::vector<double> sum4_a(cols, 0.0), sum4_b(cols, 0.0);
  for (std::int64_t r = 0; r < n_replicas; ++r) {
    Rng rng_a(rng.with_offset(static_cast<std::uint64_t>(r)));
    Rng rng_b(rng.with_offset(static_cast<std::uint64_t>(r)));
    const PathBundle pa = sampler_a.sample(rng_a);
    const PathBundle pb = sampler_b.sample(rng_b);
    for (std::size_t k = 1; k <= n; ++k) {
      for (int c = 0; c < dimension; ++c) {
        const std::size_t col = (k - 1) * static_cast<std::size_t>(dimension) + c;
        const double xa = pa.positions[k * dimension + c];
        const double xb = rescale * pb.positions[k * dimension + c];
        sum_a[col] += xa;
        sumsq_a[col] += xa * xa;
        sum4_a[col] += xa * xa * xa * xa;
        sum_b[col] += xb;
        sumsq_b[col] += xb * xb;
        sum4_b[col] += xb * xb * xb * xb;
      }
    }
  }

  // Pool coordinates: they are iid copies, so pooling just raises the
  // effective replica count to R * d per grid point.
  const double count = static_cast<double>(n_replicas) * dimension;
  RescaleCheckReport report;
  report.times.resize(n);
  report.mean_a.resize(n);
  report.mean_b.resize(n);
  report.var_a.resize(n);
  report.var_b.resize(n);
  report.z_mean_diff.resize(n);
  report.z_var_diff.resize(n);
  report.z_var_a_analytic.resize(n);
  report.z_var_b_analytic.resize(n);
  for (std::size_t k = 1; k <= n; ++k) {
    double s_a = 0.0, ss_a = 0.0, s4_a = 0.0, s_b = 0.0, ss_b = 0.0, s4_b = 0.0;
    for (int c = 0; c < dimension; ++c) {
      const std::size_t col = (k - 1) * static_cast<std::size_t>(dimension) + c;
      s_a += sum_a[col];
      ss_a += sumsq_a[col];
      s4_a += sum4_a[col];
      s_b += sum_b[col];
      ss_b += sumsq_b[col];
      s4_b += sum4_b[col];
    }
    const double t = grid.time(static_cast<std::int64_t>(k));
    const double target_var = std::pow(t, 2.0 * hurst.h);
    const double mean_a = s_a / count;
    const double mean_b = s_b / count;
    const double var_a = ss_a / count - mean_a * mean_a;
    const double var_b = ss_b / count - mean_b * mean_b;
    // SE of a Gaussian sample variance: sqrt(2/count) * var; SE of the
    // mean: sqrt(var / count). Fourth moments kept for sanity but the
    // Gaussian formulas are what the z-scores use.
    const double se_mean = std::sqrt((var_a + var_b) / count);
    const double se_var = std::sqrt(2.0 / count) * std::sqrt(var_a * var_a + var_b * var_b);
    const double se_var_a = std::sqrt(2.0 / count) * target_var;
    const std::size_t i = k - 1;
    report.times[i] = t;
    report.mean_a[i] = mean_a;
    report.mean_b[i] = mean_b;
    report.var_a[i] = var_a;
    report.var_b[i] = var_b;
    report.z_mean_diff[i] = se_mean > 0.0 ? (mean_a - mean_b) / se_mean : 0.0;
    report.z_var_diff[i] = se_var > 0.0 ? (var_a - var_b) / se_var : 0.0;
    report.z_var_a_analytic[i] = (var_a - target_var) / se_var_a;
    report.z_var_b_analytic[i] = (var_b - target_var) / se_var_a;
    report.max_abs_z_mean_diff = std::max(report.max_abs_z_mean_diff,
                                          std::abs(report.z_mean_diff[i]));
    report.max_abs_z_var_diff = std::max(report.max_abs_z_var_diff,
                                         std::abs(report.z_var_diff[i]));
    report.max_abs_z_analytic =
        std::max({report.max_abs_z_analytic, std::abs(report.z_var_a_analytic[i]),
                  std::abs(report.z_var_b_analytic[i])});
  }
  return report;
}

}  // namespace frepel
