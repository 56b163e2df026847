#pragma once

// Gibbs-weighted Monte Carlo for the repulsive path measure
// dP_g = exp(-g L_eps) dP_0 / Z. Two engines:
//
//  * prior importance sampling: free paths weighted by exp(-g L); gives the
//    partition function Z and ratio estimates like <R^2> with batch-means
//    error bars and an effective-sample-size diagnostic;
//  * a Metropolis chain in noise space: the state is the Gaussian noise
//    vector feeding the Cholesky map, proposals redraw a few noise
//    coordinates from the prior, so the acceptance rule is
//    min(1, exp(-g dL)) with no step-size knob.
//
// All replicas draw from stream_id + replica_index, so estimates are
// reproducible bit-for-bit regardless of batching.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "frepel/errors.hpp"
#include "frepel/fbm.hpp"
#include "frepel/local_time.hpp"
#include "frepel/rng.hpp"

namespace frepel {

// ---------------------------------------------------------------- config ----

enum class SamplerMethod { prior_importance, metropolis_noise };
enum class PathEngine { automatic, cholesky, circulant };

inline const char* sampler_method_name(SamplerMethod m) {
  return m == SamplerMethod::prior_importance ? "prior-importance" : "metropolis-noise";
}

inline const char* path_engine_name(PathEngine e) {
  switch (e) {
    case PathEngine::automatic: return "automatic";
    case PathEngine::cholesky: return "cholesky";
    case PathEngine::circulant: return "circulant";
  }
  return "unknown";
}

struct SamplerConfig {
  SamplerMethod method = SamplerMethod::prior_importance;
  PathEngine engine = PathEngine::automatic;
  std::int64_t n_replicas = 10000;     // prior importance
  std::int64_t n_mcmc_steps = 200000;  // metropolis chain length
  std::int64_t burn_in = 20000;
  std::int64_t block_size = 0;  // 0 = auto (sample count / 16)
  double epsilon = 1.0;
  double g = 0.0;
  bool diagonal_included = false;
  double ess_floor = 50.0;         // reliability threshold for weighted estimates
  int proposal_coordinates = 1;    // noise coordinates redrawn per proposal
  RngStream rng{};

  std::int64_t sample_count() const {
    return method == SamplerMethod::prior_importance ? n_replicas : n_mcmc_steps - burn_in;
  }

  std::int64_t resolved_block_size() const {
    if (block_size > 0) return block_size;
    return std::max<std::int64_t>(1, sample_count() / 16);
  }

  void validate() const {
    MollifierWidth{epsilon};    // reuses the width/coupling validators
    CouplingConstant{g};
    if (ess_floor < 0.0) throw std::invalid_argument("SamplerConfig: ess_floor must be >= 0");
    if (proposal_coordinates < 1)
      throw std::invalid_argument("SamplerConfig: proposal_coordinates must be >= 1");
    if (method == SamplerMethod::prior_importance) {
      if (n_replicas < 1) throw std::invalid_argument("SamplerConfig: n_replicas must be >= 1");
    } else {
      if (n_mcmc_steps < 1)
        throw std::invalid_argument("SamplerConfig: n_mcmc_steps must be >= 1");
      if (burn_in < 0 || burn_in >= n_mcmc_steps)
        throw std::invalid_argument("SamplerConfig: burn_in must lie in [0, n_mcmc_steps)");
    }
    const std::int64_t blocks = sample_count() / resolved_block_size();
    if (blocks < 8)
      throw std::invalid_argument(
          "SamplerConfig: fewer than 8 error-bar blocks (" + std::to_string(blocks) +
          "); increase the sample budget or decrease block_size");
  }
};

/// Slab constraint: coordinate `coordinate_index` (1-based) must stay in
/// [0, width] for the whole path. Paths start at the origin, so the start
/// is placed at `start_offset` inside the slab, centered by default.
struct SlabConstraint {
  int coordinate_index;
  double width;
  double start_offset;

  SlabConstraint(int index, double width_in)
      : SlabConstraint(index, width_in, width_in / 2.0) {}

  SlabConstraint(int index, double width_in, double offset)
      : coordinate_index(index), width(width_in), start_offset(offset) {
    if (index < 1) throw std::invalid_argument("SlabConstraint: coordinate_index is 1-based");
    if (!(width_in > 0.0)) throw std::invalid_argument("SlabConstraint: width must be > 0");
    if (!(offset >= 0.0 && offset <= width_in))
      throw std::invalid_argument("SlabConstraint: start_offset must lie in [0, width]");
  }
};

// ---------------------------------------------------------------- results ----

struct EstimatorResult {
  double value = std::numeric_limits<double>::quiet_NaN();
  double std_error = std::numeric_limits<double>::quiet_NaN();
  double ess = 0.0;
  std::int64_t n_samples = 0;
  std::int64_t n_blocks = 0;
  std::int64_t block_size = 0;
  double acceptance_rate = std::numeric_limits<double>::quiet_NaN();   // chain only
  double survivor_fraction = std::numeric_limits<double>::quiet_NaN();  // slab only
  bool reliable = true;
  SamplerMethod method = SamplerMethod::prior_importance;
};

/// Per-sample records from one ensemble run; weight = exp(-g L) times any
/// constraint indicator for importance runs, identically 1 for chain runs.
struct Ensemble {
  std::vector<double> r2;
  std::vector<double> local_time;
  std::vector<double> weight;
  double acceptance_rate = std::numeric_limits<double>::quiet_NaN();
  std::int64_t survivors = -1;  // -1 when no constraint was applied
};

// ---------------------------------------------------------------- detail ----

namespace detail {

/// Ratio estimate sum(a)/sum(b) with a batch-means + delta-method standard
/// error: block the stream into nb equal blocks of the configured size,
/// then se^2 = var_j(abar_j - R bbar_j) / (nb * bbar^2). For b identically
/// one this is the plain batch-means error of mean(a). Samples past the
/// last full block still enter the point estimate.
struct RatioEstimate {
  double value;
  double std_error;
  std::int64_t n_blocks;
};

inline RatioEstimate ratio_with_block_se(std::span<const double> a, std::span<const double> b,
                                         std::int64_t block_size) {
  const std::int64_t n = static_cast<std::int64_t>(a.size());
  const std::int64_t nb = block_size > 0 ? n / block_size : 0;
  double sa = 0.0, sb = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    sa += a[static_cast<std::size_t>(i)];
    sb += b[static_cast<std::size_t>(i)];
  }
  RatioEstimate out{};
  out.value = sb != 0.0 ? sa / sb : std::numeric_limits<double>::quiet_NaN();
  out.n_blocks = nb;
  if (nb < 2 || !std::isfinite(out.value)) {
    out.std_error = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  double bbar_all = 0.0;
  std::vector<double> dev(static_cast<std::size_t>(nb));
  for (std::int64_t j = 0; j < nb; ++j) {
    double ba = 0.0, bb = 0.0;
    for (std::int64_t i = j * block_size; i < (j + 1) * block_size; ++i) {
      ba += a[static_cast<std::size_t>(i)];
      bb += b[static_cast<std::size_t>(i)];
    }
    ba /= static_cast<double>(block_size);
    bb /= static_cast<double>(block_size);
    dev[static_cast<std::size_t>(j)] = ba - out.value * bb;
    bbar_all += bb;
  }
  bbar_all /= static_cast<double>(nb);
  double mean_dev = 0.0;
  for (double v : dev) mean_dev += v;
  mean_dev /= static_cast<double>(nb);
  double s2 = 0.0;
  for (double v : dev) s2 += (v - mean_dev) * (v - mean_dev);
  s2 /= static_cast<double>(nb - 1);
  out.std_error = bbar_all != 0.0
                      ? std::sqrt(s2 / static_cast<double>(nb)) / std::abs(bbar_all)
                      : std::numeric_limits<double>::quiet_NaN();
  return out;
}

inline double effective_sample_size(std::span<const double> w) {
  double s = 0.0, s2 = 0.0;
  for (double v : w) {
    s += v;
    s2 += v * v;
  }
  return s2 > 0.0 ? s * s / s2 : 0.0;
}

}  // namespace detail

// ------------------------------------------------------------ path engine ----

/// Engine selection: the dense factorization is the default at desk-scale
/// grids, the circulant sampler takes over for long paths.
inline PathEngine resolve_engine(PathEngine requested, const TimeGrid& grid) {
  if (requested != PathEngine::automatic) return requested;
  return grid.n_steps <= 1024 ? PathEngine::cholesky : PathEngine::circulant;
}

class PathSampler {
 public:
  PathSampler(HurstParameter hurst, const TimeGrid& grid, int dimension, PathEngine engine)
      : engine_(make(hurst, grid, dimension, engine)) {}

  PathBundle sample(Rng& rng) const {
    return std::visit([&rng](const auto& s) { return s.sample(rng); }, engine_);
  }

 private:
  using Variant = std::variant<CholeskySampler, CirculantSampler>;

  static Variant make(HurstParameter hurst, const TimeGrid& grid, int dimension,
                      PathEngine engine) {
    if (resolve_engine(engine, grid) == PathEngine::cholesky)
      return Variant(std::in_place_type<CholeskySampler>, hurst, grid, dimension);
    return Variant(std::in_place_type<CirculantSampler>, hurst, grid, dimension);
  }

  Variant engine_;
};

// ------------------------------------------------------------- ensembles ----

/// Free-path ensemble with Gibbs weights; optionally a slab constraint
/// folded into the weights as an indicator. Replica r draws from
/// rng.stream_id + r. Local time is skipped for killed paths (their weight
/// is identically zero).
inline Ensemble run_prior_ensemble(HurstParameter hurst, const TimeGrid& grid, int dimension,
                                   const SamplerConfig& config,
                                   const std::optional<SlabConstraint>& slab = std::nullopt) {
  if (slab && (slab->coordinate_index > dimension))
    throw std::invalid_argument("slab constraint names coordinate " +
                                std::to_string(slab->coordinate_index) + " but d = " +
                                std::to_string(dimension));
  const PathSampler sampler(hurst, grid, dimension, config.engine);
  const MollifierWidth width(config.epsilon);
  Ensemble out;
  const std::size_t count = static_cast<std::size_t>(config.n_replicas);
  out.r2.reserve(count);
  out.local_time.reserve(count);
  out.weight.reserve(count);
  std::int64_t survivors = 0;
  for (std::int64_t r = 0; r < config.n_replicas; ++r) {
    Rng rng(config.rng.with_offset(static_cast<std::uint64_t>(r)));
    const PathBundle path = sampler.sample(rng);
    bool alive = true;
    if (slab) {
      const int c = slab->coordinate_index - 1;
      for (std::int64_t k = 0; k <= grid.n_steps; ++k) {
        const double y = path.position(k, c) + slab->start_offset;
        if (y < 0.0 || y > slab->width) {
          alive = false;
          break;
        }
      }
    }
    out.r2.push_back(path.end_to_end_sq());
    if (alive) {
      ++survivors;
      const double lt = local_time(path, width, config.diagonal_included).local_time;
      out.local_time.push_back(lt);
      out.weight.push_back(std::exp(-config.g * lt));
    } else {
      out.local_time.push_back(std::numeric_limits<double>::quiet_NaN());
      out.weight.push_back(0.0);
    }
  }
  out.survivors = slab ? survivors : -1;
  return out;
}

/// Noise-space Metropolis chain. State: the n*d standard-normal vector z
/// feeding the Cholesky map (coordinate-major, z[c*n + i]). A proposal
/// redraws `proposal_coordinates` distinct entries from N(0,1); since that
/// keeps the prior invariant, acceptance is min(1, exp(-g dL)). Position
/// updates after a single-entry change cost O(n) through the factor column.
inline Ensemble run_metropolis_chain(HurstParameter hurst, const TimeGrid& grid, int dimension,
                                     const SamplerConfig& config) {
  if (config.engine == PathEngine::circulant)
    throw std::invalid_argument(
        "metropolis_noise uses the Cholesky noise map; engine=circulant is not supported");
  const CholeskySampler sampler(hurst, grid, dimension);
  const MollifierWidth width(config.epsilon);
  const std::size_t n = static_cast<std::size_t>(grid.n_steps);
  const std::size_t nd = n * static_cast<std::size_t>(dimension);
  const std::vector<double>& fac = sampler.factor();

  Rng rng(config.rng);
  std::vector<double> z(nd);
  for (double& v : z) v = rng.normal();
  std::vector<double> positions;
  sampler.positions_from_noise(z, positions);
  std::vector<double> increments(nd);  // coordinate-major, kept in sync with z
  for (int c = 0; c < dimension; ++c)
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k <= i; ++k)
        s += fac[i * n + k] * z[static_cast<std::size_t>(c) * n + k];
      increments[static_cast<std::size_t>(c) * n + i] = s;
    }

  double current_lt = local_time_from_points(positions.data(), n + 1, dimension, grid.dt(),
                                             width, config.diagonal_included);

  std::vector<double> prop_inc(nd), prop_pos(positions.size());
  std::vector<std::size_t> chosen(static_cast<std::size_t>(config.proposal_coordinates));
  std::vector<double> old_z(chosen.size());

  Ensemble out;
  const std::size_t keep = static_cast<std::size_t>(config.n_mcmc_steps - config.burn_in);
  out.r2.reserve(keep);
  out.local_time.reserve(keep);
  out.weight.assign(keep, 1.0);
  std::int64_t accepted = 0;

  for (std::int64_t step = 0; step < config.n_mcmc_steps; ++step) {
    // pick distinct noise coordinates, then redraw them
    for (std::size_t t = 0; t < chosen.size(); ++t) {
      std::size_t idx;
      bool fresh;
      do {
        idx = static_cast<std::size_t>(rng.uniform_below(nd));
        fresh = true;
        for (std::size_t s = 0; s < t; ++s)
          if (chosen[s] == idx) fresh = false;
      } while (!fresh);
      chosen[t] = idx;
    }
    prop_inc = increments;
    for (std::size_t t = 0; t < chosen.size(); ++t) {
      const std::size_t idx = chosen[t];
      old_z[t] = z[idx];
      const double znew = rng.normal();
      const double dz = znew - z[idx];
      z[idx] = znew;
      const std::size_t c = idx / n;
      const std::size_t i = idx % n;
      for (std::size_t j = i; j < n; ++j) prop_inc[c * n + j] += fac[j * n + i] * dz;
    }
    for (int c = 0; c < dimension; ++c) {
      double acc = 0.0;
      prop_pos[static_cast<std::size_t>(c)] = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += prop_inc[static_cast<std::size_t>(c) * n + i];
        prop_pos[(i + 1) * static_cast<std::size_t>(dimension) + static_cast<std::size_t>(c)] =
            acc;
      }
    }
    const double prop_lt = local_time_from_points(prop_pos.data(), n + 1, dimension, grid.dt(),
                                                  width, config.diagonal_included);
    const double u = rng.uniform01();
    if (u < std::exp(-config.g * (prop_lt - current_lt))) {
      increments.swap(prop_inc);
      positions.swap(prop_pos);
      current_lt = prop_lt;
      ++accepted;
    } else {
      for (std::size_t t = 0; t < chosen.size(); ++t) z[chosen[t]] = old_z[t];
    }
    if (step >= config.burn_in) {
      double r2 = 0.0;
      const std::size_t last = n * static_cast<std::size_t>(dimension);
      for (int c = 0; c < dimension; ++c) {
        const double dx = positions[last + c] - positions[static_cast<std::size_t>(c)];
        r2 += dx * dx;
      }
      out.r2.push_back(r2);
      out.local_time.push_back(current_lt);
    }
  }
  out.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(config.n_mcmc_steps);
  return out;
}

// ------------------------------------------------------------- estimators ----

namespace detail {

inline EstimatorResult finish_weighted(const Ensemble& ensemble, const SamplerConfig& config,
                                       std::span<const double> numerator,
                                       std::span<const double> denominator) {
  EstimatorResult res;
  res.method = config.method;
  res.n_samples = static_cast<std::int64_t>(numerator.size());
  res.block_size = config.resolved_block_size();
  const RatioEstimate est = ratio_with_block_se(numerator, denominator, res.block_size);
  res.value = est.value;
  res.std_error = est.std_error;
  res.n_blocks = est.n_blocks;
  if (config.method == SamplerMethod::prior_importance) {
    res.ess = effective_sample_size(ensemble.weight);
    res.reliable = res.ess >= config.ess_floor;
  } else {
    res.ess = static_cast<double>(res.n_samples);
    res.acceptance_rate = ensemble.acceptance_rate;
    res.reliable = ensemble.acceptance_rate >= 0.05 && ensemble.acceptance_rate <= 0.95;
  }
  if (ensemble.survivors >= 0) {
    res.survivor_fraction =
        static_cast<double>(ensemble.survivors) / static_cast<double>(ensemble.r2.size());
    if (ensemble.survivors == 0) res.reliable = false;
  }
  if (!std::isfinite(res.value) || !std::isfinite(res.std_error)) res.reliable = false;
  return res;
}

}  // namespace detail

/// Partition function Z = E_0[exp(-g L_eps)], prior importance only (the
/// chain targets the Gibbs measure and cannot see its own normalizer).
inline EstimatorResult estimate_partition(HurstParameter hurst, const TimeGrid& grid,
                                          int dimension, const SamplerConfig& config) {
  config.validate();
  if (config.method != SamplerMethod::prior_importance)
    throw std::invalid_argument("estimate_partition requires method = prior_importance");
  const Ensemble ens = run_prior_ensemble(hurst, grid, dimension, config);
  std::vector<double> ones(ens.weight.size(), 1.0);
  return detail::finish_weighted(ens, config, ens.weight, ones);
}

/// Gibbs-averaged squared end-to-end displacement <R^2>_g.
inline EstimatorResult estimate_r2(HurstParameter hurst, const TimeGrid& grid, int dimension,
                                   const SamplerConfig& config) {
  config.validate();
  const Ensemble ens = config.method == SamplerMethod::prior_importance
                           ? run_prior_ensemble(hurst, grid, dimension, config)
                           : run_metropolis_chain(hurst, grid, dimension, config);
  std::vector<double> weighted(ens.r2.size());
  for (std::size_t i = 0; i < ens.r2.size(); ++i) weighted[i] = ens.r2[i] * ens.weight[i];
  return detail::finish_weighted(ens, config, weighted, ens.weight);
}

/// <R^2> under the Gibbs measure conditioned on one coordinate staying in
/// a slab of the given width. Prior importance only: the indicator folds
/// into the weights. Throws EmptyEnsembleError when nothing survives.
inline EstimatorResult estimate_r2_slab(HurstParameter hurst, const TimeGrid& grid,
                                        int dimension, const SlabConstraint& slab,
                                        const SamplerConfig& config) {
  config.validate();
  if (config.method != SamplerMethod::prior_importance)
    throw std::invalid_argument(
        "estimate_r2_slab requires method = prior_importance (the indicator is an "
        "importance weight, not a chain target)");
  const Ensemble ens = run_prior_ensemble(hurst, grid, dimension, config, slab);
  if (ens.survivors == 0)
    throw EmptyEnsembleError(
        "slab constraint killed every path (width " + std::to_string(slab.width) +
        "); widen the slab or raise n_replicas");
  std::vector<double> weighted(ens.r2.size());
  for (std::size_t i = 0; i < ens.r2.size(); ++i) weighted[i] = ens.r2[i] * ens.weight[i];
  return detail::finish_weighted(ens, config, weighted, ens.weight);
}

}  // namespace frepel
