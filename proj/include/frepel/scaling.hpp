#pragma once

// Experiment layer: horizon ladders with exponent fits, the exact
// rescaling cross-check, free-endpoint density verification, mollifier
// sensitivity scans, and the slab (dimensional reduction) experiment.
// Ladder rungs reuse a common stream base where that sharpens comparisons
// (common random numbers) and take disjoint stream ranges where
// independence matters (sweep rungs feeding a fit).

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "frepel/errors.hpp"
#include "frepel/fbm.hpp"
#include "frepel/flory.hpp"
#include "frepel/gibbs.hpp"

namespace frepel {

// ------------------------------------------------------------ epsilon spec ----

enum class EpsilonPolicy {
  grid_matched,  // epsilon = c * dt^{2H}; keeps the mollifier pinned to the grid
                 // so the rescaling map is exact in law rung to rung
  fixed,         // one absolute width everywhere
};

struct EpsilonSpec {
  EpsilonPolicy policy = EpsilonPolicy::grid_matched;
  double c = 1.0;            // grid_matched multiplier
  double fixed_value = 1.0;  // fixed policy width

  double resolve(HurstParameter hurst, const TimeGrid& grid) const {
    if (policy == EpsilonPolicy::fixed) return fixed_value;
    return c * std::pow(grid.dt(), 2.0 * hurst.h);
  }

  void validate() const {
    if (policy == EpsilonPolicy::grid_matched && !(c > 0.0))
      throw std::invalid_argument("EpsilonSpec: c must be > 0");
    if (policy == EpsilonPolicy::fixed && !(fixed_value > 0.0))
      throw std::invalid_argument("EpsilonSpec: fixed_value must be > 0");
  }
};

inline const char* epsilon_policy_name(EpsilonPolicy p) {
  return p == EpsilonPolicy::grid_matched ? "grid-matched" : "fixed";
}

// ---------------------------------------------------------------- fitting ----

/// Straight-line fit y = intercept + slope * x. Weighted least squares
/// with weights 1/sigma_i^2 when all sigmas are positive and finite
/// (slope error is then pure propagation, 1/sqrt(Sxx)); otherwise an
/// unweighted fit with a residual-based slope error.
struct FitResult {
  double slope = std::numeric_limits<double>::quiet_NaN();
  double intercept = std::numeric_limits<double>::quiet_NaN();
  double slope_std_error = std::numeric_limits<double>::quiet_NaN();
  double r_squared = std::numeric_limits<double>::quiet_NaN();
  int n_points = 0;
  bool weighted = false;

  double nu() const { return slope / 2.0; }
  double nu_std_error() const { return slope_std_error / 2.0; }
};

inline FitResult fit_line(std::span<const double> x, std::span<const double> y,
                          std::span<const double> sigma) {
  const std::size_t n = x.size();
  if (y.size() != n || sigma.size() != n)
    throw std::invalid_argument("fit_line: mismatched input lengths");
  if (n < 2) throw std::invalid_argument("fit_line: need at least 2 points");
  bool weighted = true;
  for (double s : sigma)
    if (!(s > 0.0) || !std::isfinite(s)) weighted = false;

  std::vector<double> w(n, 1.0);
  if (weighted)
    for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 / (sigma[i] * sigma[i]);

  double sw = 0.0, swx = 0.0, swy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sw += w[i];
    swx += w[i] * x[i];
    swy += w[i] * y[i];
  }
  const double xbar = swx / sw;
  const double ybar = swy / sw;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += w[i] * (x[i] - xbar) * (x[i] - xbar);
    sxy += w[i] * (x[i] - xbar) * (y[i] - ybar);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("fit_line: abscissas are degenerate");

  FitResult fit;
  fit.n_points = static_cast<int>(n);
  fit.weighted = weighted;
  fit.slope = sxy / sxx;
  fit.intercept = ybar - fit.slope * xbar;
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - fit.intercept - fit.slope * x[i];
    ss_res += w[i] * r * r;
    ss_tot += w[i] * (y[i] - ybar) * (y[i] - ybar);
  }
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  if (weighted) {
    fit.slope_std_error = std::sqrt(1.0 / sxx);
  } else if (n > 2) {
    fit.slope_std_error = std::sqrt((ss_res / static_cast<double>(n - 2)) / sxx);
  } else {
    fit.slope_std_error = 0.0;
  }
  return fit;
}

// ------------------------------------------------------------------ sweep ----

enum class StepPolicy {
  fixed_count,  // same n_steps on every rung; dt grows with the horizon
  fixed_dt,     // same dt on every rung; n_steps grows with the horizon
};

struct ExperimentPlan {
  HurstParameter hurst;
  int dimension = 2;
  double g = 0.0;
  EpsilonSpec epsilon{};
  std::vector<double> ladder;  // horizons, strictly ascending, at least 4
  StepPolicy step_policy = StepPolicy::fixed_count;
  std::int64_t n_steps = 64;  // fixed_count rung resolution
  double dt = 1.0;            // fixed_dt spacing
  double fit_min_horizon = 16.0;
  SamplerConfig sampler{};

  void validate() const {
    if (dimension < 1) throw std::invalid_argument("ExperimentPlan: dimension must be >= 1");
    CouplingConstant{g};
    epsilon.validate();
    if (ladder.size() < 4)
      throw std::invalid_argument("ExperimentPlan: ladder needs at least 4 horizons");
    for (std::size_t i = 0; i + 1 < ladder.size(); ++i)
      if (!(ladder[i] < ladder[i + 1]))
        throw std::invalid_argument("ExperimentPlan: ladder must be strictly ascending");
    if (!(ladder.front() > 0.0))
      throw std::invalid_argument("ExperimentPlan: horizons must be positive");
    if (step_policy == StepPolicy::fixed_count && n_steps < 2)
      throw std::invalid_argument("ExperimentPlan: n_steps must be >= 2");
    if (step_policy == StepPolicy::fixed_dt && !(dt > 0.0))
      throw std::invalid_argument("ExperimentPlan: dt must be > 0");
    sampler.validate();
  }

  TimeGrid grid_for(double horizon) const {
    if (step_policy == StepPolicy::fixed_count) return TimeGrid(n_steps, horizon);
    const std::int64_t steps = std::llround(horizon / dt);
    if (steps < 2)
      throw std::invalid_argument("ExperimentPlan: horizon " + std::to_string(horizon) +
                                  " gives fewer than 2 steps at dt " + std::to_string(dt));
    return TimeGrid(steps, horizon);
  }
};

struct SweepPoint {
  double horizon = 0.0;
  double epsilon_used = 0.0;
  std::int64_t n_steps_used = 0;
  EstimatorResult r2;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  bool partial = false;  // set when any rung came back flagged unreliable
};

/// <R^2>_g across the horizon ladder. Rung r gets the disjoint stream
/// range [base + r * stride, ...) so rungs are independent draws.
inline SweepResult run_r2_sweep(const ExperimentPlan& plan) {
  plan.validate();
  const std::uint64_t stride =
      plan.sampler.method == SamplerMethod::prior_importance
          ? static_cast<std::uint64_t>(plan.sampler.n_replicas)
          : 1;
  SweepResult out;
  out.points.reserve(plan.ladder.size());
  for (std::size_t r = 0; r < plan.ladder.size(); ++r) {
    const TimeGrid grid = plan.grid_for(plan.ladder[r]);
    SamplerConfig config = plan.sampler;
    config.epsilon = plan.epsilon.resolve(plan.hurst, grid);
    config.rng = plan.sampler.rng.with_offset(static_cast<std::uint64_t>(r) * stride);
    SweepPoint point;
    point.horizon = plan.ladder[r];
    point.epsilon_used = config.epsilon;
    point.n_steps_used = grid.n_steps;
    point.r2 = estimate_r2(plan.hurst, grid, plan.dimension, config);
    if (!point.r2.reliable) out.partial = true;
    out.points.push_back(std::move(point));
  }
  return out;
}

/// Log-log fit of <R^2> against the horizon; nu = slope / 2. Rungs below
/// min_horizon are left out (transient regime), matching the quality
/// conventions of the sweep CSV.
inline FitResult fit_exponent(const SweepResult& sweep, double min_horizon = 16.0) {
  std::vector<double> x, y, sigma;
  for (const SweepPoint& p : sweep.points) {
    if (p.horizon < min_horizon) continue;
    if (!(p.r2.value > 0.0) || !std::isfinite(p.r2.value))
      throw std::invalid_argument("fit_exponent: non-positive <R^2> estimate at horizon " +
                                  std::to_string(p.horizon));
    x.push_back(std::log(p.horizon));
    y.push_back(std::log(p.r2.value));
    sigma.push_back(p.r2.std_error / p.r2.value);  // log-transformed error
  }
  if (x.size() < 2)
    throw std::invalid_argument("fit_exponent: fewer than 2 usable rungs above min_horizon");
  return fit_line(x, y, sigma);
}

// ------------------------------------------------------- scale invariance ----

/// Both sides of the exact rescaling map between (N, g) and
/// (aN, g a^{Hd-2}) at the same step count. The partition functions are
/// equal outright (z_score compares them directly); <R^2> picks up the
/// factor a^{2H}, undone before its z-score. With the grid-matched epsilon
/// policy (epsilon scaling by a^{2H}) the two Gibbs measures are exact
/// images of each other, so both differences are pure Monte Carlo noise;
/// rhs_stream_offset = 0 reuses the lhs streams and drives them to
/// rounding level.
struct InvarianceTestReport {
  double a = 1.0;
  double g_lhs = 0.0, g_rhs = 0.0;
  double epsilon_lhs = 0.0, epsilon_rhs = 0.0;
  EstimatorResult partition_lhs, partition_rhs;
  double z_score = 0.0;  // partition comparison, the identity itself
  EstimatorResult r2_lhs, r2_rhs;
  double r2_rhs_rescaled = 0.0, r2_rhs_rescaled_std_error = 0.0;
  double z_r2 = 0.0;  // rescaled mean-square displacement comparison
};

inline InvarianceTestReport test_scale_invariance(HurstParameter hurst, int dimension, double g,
                                                  double horizon, double a,
                                                  std::int64_t n_steps,
                                                  const EpsilonSpec& epsilon,
                                                  const SamplerConfig& base,
                                                  std::uint64_t rhs_stream_offset) {
  if (!(a > 0.0)) throw std::invalid_argument("test_scale_invariance: a must be > 0");
  if (base.method != SamplerMethod::prior_importance)
    throw std::invalid_argument(
        "test_scale_invariance: prior_importance only (the partition comparison needs "
        "normalized weights)");
  CouplingConstant{g};
  epsilon.validate();
  const TimeGrid grid_lhs(n_steps, horizon);
  const TimeGrid grid_rhs(n_steps, a * horizon);

  SamplerConfig lhs_cfg = base;
  lhs_cfg.g = g;
  lhs_cfg.epsilon = epsilon.resolve(hurst, grid_lhs);
  lhs_cfg.validate();
  SamplerConfig rhs_cfg = base;
  rhs_cfg.g = g * std::pow(a, hurst.h * dimension - 2.0);
  rhs_cfg.epsilon = epsilon.resolve(hurst, grid_rhs);
  rhs_cfg.rng = base.rng.with_offset(rhs_stream_offset);
  rhs_cfg.validate();

  InvarianceTestReport report;
  report.a = a;
  report.g_lhs = lhs_cfg.g;
  report.g_rhs = rhs_cfg.g;
  report.epsilon_lhs = lhs_cfg.epsilon;
  report.epsilon_rhs = rhs_cfg.epsilon;

  // one ensemble per arm feeds both comparisons
  const Ensemble lhs_ens = run_prior_ensemble(hurst, grid_lhs, dimension, lhs_cfg);
  const Ensemble rhs_ens = run_prior_ensemble(hurst, grid_rhs, dimension, rhs_cfg);
  const std::vector<double> ones_lhs(lhs_ens.weight.size(), 1.0);
  const std::vector<double> ones_rhs(rhs_ens.weight.size(), 1.0);
  report.partition_lhs = detail::finish_weighted(lhs_ens, lhs_cfg, lhs_ens.weight, ones_lhs);
  report.partition_rhs = detail::finish_weighted(rhs_ens, rhs_cfg, rhs_ens.weight, ones_rhs);
  std::vector<double> weighted_lhs(lhs_ens.r2.size()), weighted_rhs(rhs_ens.r2.size());
  for (std::size_t i = 0; i < weighted_lhs.size(); ++i)
    weighted_lhs[i] = lhs_ens.r2[i] * lhs_ens.weight[i];
  for (std::size_t i = 0; i < weighted_rhs.size(); ++i)
    weighted_rhs[i] = rhs_ens.r2[i] * rhs_ens.weight[i];
  report.r2_lhs = detail::finish_weighted(lhs_ens, lhs_cfg, weighted_lhs, lhs_ens.weight);
  report.r2_rhs = detail::finish_weighted(rhs_ens, rhs_cfg, weighted_rhs, rhs_ens.weight);

  const double z_combined =
      std::sqrt(report.partition_lhs.std_error * report.partition_lhs.std_error +
                report.partition_rhs.std_error * report.partition_rhs.std_error);
  report.z_score =
      z_combined > 0.0
          ? (report.partition_lhs.value - report.partition_rhs.value) / z_combined
          : 0.0;

  const double rescale = std::pow(a, -2.0 * hurst.h);
  report.r2_rhs_rescaled = rescale * report.r2_rhs.value;
  report.r2_rhs_rescaled_std_error = rescale * report.r2_rhs.std_error;
  const double r2_combined =
      std::sqrt(report.r2_lhs.std_error * report.r2_lhs.std_error +
                report.r2_rhs_rescaled_std_error * report.r2_rhs_rescaled_std_error);
  report.z_r2 = r2_combined > 0.0
                    ? (report.r2_lhs.value - report.r2_rhs_rescaled) / r2_combined
                    : 0.0;
  return report;
}

// ------------------------------------------------------------ end density ----

/// Free endpoints must be centered Gaussians with variance N^{2H} per
/// coordinate. Checks mean, variance, and excess kurtosis per pooled
/// coordinate plus <R^2> against d * N^{2H}, all as z-scores.
struct EndDensityReport {
  double horizon = 0.0;
  std::int64_t n_replicas = 0;
  double target_variance = 0.0;
  double mean = 0.0, z_mean = 0.0;
  double variance = 0.0, z_variance = 0.0;
  double excess_kurtosis = 0.0, z_kurtosis = 0.0;
  double mean_r2 = 0.0, target_r2 = 0.0, z_r2 = 0.0;
  double max_abs_z = 0.0;
};

inline EndDensityReport verify_end_density(HurstParameter hurst, int dimension, double horizon,
                                           std::int64_t n_replicas, RngStream rng,
                                           std::int64_t n_steps = 32) {
  if (n_replicas < 2)
    throw std::invalid_argument("verify_end_density: need at least 2 replicas");
  const TimeGrid grid(n_steps, horizon);
  const CholeskySampler sampler(hurst, grid, dimension);
  double s1 = 0.0, s2 = 0.0, s4 = 0.0, sr2 = 0.0, sr4 = 0.0;
  for (std::int64_t r = 0; r < n_replicas; ++r) {
    Rng replica_rng(rng.with_offset(static_cast<std::uint64_t>(r)));
    const PathBundle path = sampler.sample(replica_rng);
    double r2 = 0.0;
    for (int c = 0; c < dimension; ++c) {
      const double x = path.position(grid.n_steps, c);
      s1 += x;
      s2 += x * x;
      s4 += x * x * x * x;
      r2 += x * x;
    }
    sr2 += r2;
    sr4 += r2 * r2;
  }
  const double count = static_cast<double>(n_replicas) * dimension;
  const double target = std::pow(horizon, 2.0 * hurst.h);

  EndDensityReport rep;
  rep.horizon = horizon;
  rep.n_replicas = n_replicas;
  rep.target_variance = target;
  rep.mean = s1 / count;
  rep.variance = s2 / count - rep.mean * rep.mean;
  const double m4 = s4 / count;
  rep.excess_kurtosis = m4 / (rep.variance * rep.variance) - 3.0;
  rep.z_mean = rep.mean / std::sqrt(target / count);
  rep.z_variance = (rep.variance - target) / (std::sqrt(2.0 / count) * target);
  rep.z_kurtosis = rep.excess_kurtosis / std::sqrt(24.0 / count);
  rep.mean_r2 = sr2 / static_cast<double>(n_replicas);
  rep.target_r2 = dimension * target;
  const double var_r2 =
      sr4 / static_cast<double>(n_replicas) - rep.mean_r2 * rep.mean_r2;
  rep.z_r2 = (rep.mean_r2 - rep.target_r2) /
             std::sqrt(var_r2 / static_cast<double>(n_replicas));
  rep.max_abs_z = std::max({std::abs(rep.z_mean), std::abs(rep.z_variance),
                            std::abs(rep.z_kurtosis), std::abs(rep.z_r2)});
  return rep;
}

// ----------------------------------------------------------- epsilon scan ----

struct EpsScanPoint {
  double epsilon = 0.0;
  EstimatorResult partition;
  EstimatorResult r2;
};

/// Z and <R^2> across a strictly descending mollifier ladder. Every rung
/// reuses the same stream base, so the rungs see identical paths and the
/// scan isolates the epsilon dependence (common random numbers).
inline std::vector<EpsScanPoint> epsilon_stability_scan(HurstParameter hurst,
                                                        const TimeGrid& grid, int dimension,
                                                        const std::vector<double>& widths,
                                                        const SamplerConfig& base) {
  if (widths.empty()) throw std::invalid_argument("epsilon_stability_scan: empty ladder");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i)
    if (!(widths[i] > widths[i + 1]))
      throw std::invalid_argument("epsilon_stability_scan: ladder must be strictly descending");
  if (base.method != SamplerMethod::prior_importance)
    throw std::invalid_argument("epsilon_stability_scan: prior_importance only");
  std::vector<EpsScanPoint> out;
  out.reserve(widths.size());
  for (double eps : widths) {
    SamplerConfig config = base;
    config.epsilon = eps;
    EpsScanPoint point;
    point.epsilon = eps;
    point.partition = estimate_partition(hurst, grid, dimension, config);
    point.r2 = estimate_r2(hurst, grid, dimension, config);
    out.push_back(point);
  }
  return out;
}

// ------------------------------------------------------------------- slab ----

struct SlabPoint {
  double width = 0.0;
  bool dropped = false;  // constraint killed the whole ensemble
  EstimatorResult r2;
};

struct SlabExperimentResult {
  int coordinate_index = 1;
  double horizon = 0.0;
  double epsilon_used = 0.0;
  EstimatorResult r2_unconstrained;
  std::vector<SlabPoint> points;
  FitResult fit;  // ln(r2_D / r2) against ln(D / sqrt(r2)); y_measured = -slope
  bool fit_valid = false;
  double y_measured = std::numeric_limits<double>::quiet_NaN();
  double y_predicted = std::numeric_limits<double>::quiet_NaN();
};

/// Squeeze coordinate 1 into slabs of descending width and track
/// <R^2>_D / <R^2>. All rungs and the unconstrained reference share one
/// stream base: identical paths, nested survivor sets, and the width
/// dependence isolated from sampling noise.
inline SlabExperimentResult slab_reduction_experiment(HurstParameter hurst, int dimension,
                                                      double g, double horizon,
                                                      const std::vector<double>& widths,
                                                      std::int64_t n_steps,
                                                      const EpsilonSpec& epsilon,
                                                      const SamplerConfig& base) {
  if (dimension < 2)
    throw std::invalid_argument("slab_reduction_experiment: need d >= 2");
  if (widths.empty()) throw std::invalid_argument("slab_reduction_experiment: empty ladder");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i)
    if (!(widths[i] > widths[i + 1]))
      throw std::invalid_argument("slab_reduction_experiment: widths must be strictly descending");
  const TimeGrid grid(n_steps, horizon);
  SamplerConfig config = base;
  config.g = g;
  config.epsilon = epsilon.resolve(hurst, grid);

  SlabExperimentResult out;
  out.coordinate_index = 1;
  out.horizon = horizon;
  out.epsilon_used = config.epsilon;
  out.r2_unconstrained = estimate_r2(hurst, grid, dimension, config);
  out.y_predicted = slab_exponent_y(hurst.h, static_cast<double>(dimension));

  std::vector<double> fit_x, fit_y, fit_sigma;
  for (double width : widths) {
    SlabPoint point;
    point.width = width;
    try {
      point.r2 = estimate_r2_slab(hurst, grid, dimension, SlabConstraint(1, width), config);
    } catch (const EmptyEnsembleError&) {
      point.dropped = true;
    }
    if (!point.dropped && point.r2.value > 0.0 && std::isfinite(point.r2.value)) {
      fit_x.push_back(std::log(width / std::sqrt(out.r2_unconstrained.value)));
      fit_y.push_back(std::log(point.r2.value / out.r2_unconstrained.value));
      fit_sigma.push_back(point.r2.std_error / point.r2.value);
    }
    out.points.push_back(point);
  }
  if (fit_x.size() >= 2) {
    out.fit = fit_line(fit_x, fit_y, fit_sigma);
    out.fit_valid = true;
    out.y_measured = -out.fit.slope;
  }
  return out;
}

}  // namespace frepel
