#include "frepel/gibbs.hpp"

#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

using namespace frepel;

namespace {

// Independent transcription of the defining pair sum, kept deliberately
// naive (plain accumulation, unordered pairs doubled) as an oracle.
double naive_local_time(const PathBundle& path, double eps) {
  const std::size_t n_points = static_cast<std::size_t>(path.grid.n_steps) + 1;
  const double pref =
      std::pow(2.0 * std::numbers::pi * eps, -0.5 * static_cast<double>(path.dimension));
  double sum = 0.0;
  for (std::size_t i = 0; i < n_points; ++i)
    for (std::size_t j = i + 1; j < n_points; ++j) {
      double sq = 0.0;
      for (int c = 0; c < path.dimension; ++c) {
        const double dx = path.position(static_cast<std::int64_t>(i), c) -
                          path.position(static_cast<std::int64_t>(j), c);
        sq += dx * dx;
      }
      sum += 2.0 * std::exp(-sq / (2.0 * eps));
    }
  const double dt = path.grid.dt();
  return dt * dt * pref * sum;
}

SamplerConfig importance_config(std::int64_t n_replicas, double g, double eps,
                                std::uint64_t seed) {
  SamplerConfig config;
  config.method = SamplerMethod::prior_importance;
  config.n_replicas = n_replicas;
  config.g = g;
  config.epsilon = eps;
  config.rng = RngStream{seed, 0};
  return config;
}

SamplerConfig chain_config(std::int64_t steps, std::int64_t burn_in, double g, double eps,
                           std::uint64_t seed) {
  SamplerConfig config;
  config.method = SamplerMethod::metropolis_noise;
  config.n_mcmc_steps = steps;
  config.burn_in = burn_in;
  config.g = g;
  config.epsilon = eps;
  config.rng = RngStream{seed, 0};
  return config;
}

}  // namespace

TEST(SamplerConfig, Validation) {
  SamplerConfig config = importance_config(1000, 0.5, 1.0, 1);
  EXPECT_NO_THROW(config.validate());

  SamplerConfig bad_eps = config;
  bad_eps.epsilon = 0.0;
  EXPECT_THROW(bad_eps.validate(), std::invalid_argument);

  SamplerConfig bad_g = config;
  bad_g.g = -1.0;
  EXPECT_THROW(bad_g.validate(), std::invalid_argument);

  SamplerConfig bad_floor = config;
  bad_floor.ess_floor = -1.0;
  EXPECT_THROW(bad_floor.validate(), std::invalid_argument);

  SamplerConfig bad_prop = config;
  bad_prop.proposal_coordinates = 0;
  EXPECT_THROW(bad_prop.validate(), std::invalid_argument);

  SamplerConfig bad_reps = config;
  bad_reps.n_replicas = 0;
  EXPECT_THROW(bad_reps.validate(), std::invalid_argument);

  SamplerConfig few_blocks = config;
  few_blocks.block_size = 500;  // only 2 blocks
  EXPECT_THROW(few_blocks.validate(), std::invalid_argument);

  SamplerConfig chain = chain_config(1000, 100, 0.5, 1.0, 1);
  EXPECT_NO_THROW(chain.validate());
  EXPECT_EQ(chain.sample_count(), 900);
  SamplerConfig bad_burn = chain;
  bad_burn.burn_in = 1000;
  EXPECT_THROW(bad_burn.validate(), std::invalid_argument);

  EXPECT_EQ(importance_config(1600, 0.0, 1.0, 1).resolved_block_size(), 100);
}

TEST(SlabConstraintStruct, Validation) {
  EXPECT_THROW(SlabConstraint(0, 1.0), std::invalid_argument);
  EXPECT_THROW(SlabConstraint(1, 0.0), std::invalid_argument);
  EXPECT_THROW(SlabConstraint(1, 1.0, 2.0), std::invalid_argument);
  EXPECT_THROW(SlabConstraint(1, 1.0, -0.5), std::invalid_argument);
  const SlabConstraint centered(2, 3.0);
  EXPECT_EQ(centered.coordinate_index, 2);
  EXPECT_DOUBLE_EQ(centered.start_offset, 1.5);
}

TEST(RatioBlockSe, HandChecked) {
  const std::array<double, 8> a{1, 2, 3, 4, 5, 6, 7, 8};
  const std::array<double, 8> ones{1, 1, 1, 1, 1, 1, 1, 1};
  const auto est = detail::ratio_with_block_se(a, ones, 2);
  EXPECT_DOUBLE_EQ(est.value, 4.5);
  EXPECT_EQ(est.n_blocks, 4);
  // block means 1.5, 3.5, 5.5, 7.5; deviations -3, -1, 1, 3
  EXPECT_NEAR(est.std_error, std::sqrt((20.0 / 3.0) / 4.0), 1e-15);

  const std::array<double, 2> num{2, 4};
  const std::array<double, 2> den{2, 2};
  const auto ratio = detail::ratio_with_block_se(num, den, 1);
  EXPECT_DOUBLE_EQ(ratio.value, 1.5);
  EXPECT_NEAR(ratio.std_error, 0.5, 1e-15);

  // a trailing partial block enters the point estimate, not the error bar
  const std::array<double, 5> tail{1, 1, 1, 1, 11};
  const auto partial = detail::ratio_with_block_se(tail, std::array<double, 5>{1, 1, 1, 1, 1},
                                                   2);
  EXPECT_DOUBLE_EQ(partial.value, 3.0);
  EXPECT_EQ(partial.n_blocks, 2);

  const auto degenerate = detail::ratio_with_block_se(num, den, 2);
  EXPECT_EQ(degenerate.n_blocks, 1);
  EXPECT_TRUE(std::isnan(degenerate.std_error));
}

TEST(EffectiveSampleSize, Properties) {
  const std::array<double, 4> equal{0.3, 0.3, 0.3, 0.3};
  EXPECT_NEAR(detail::effective_sample_size(equal), 4.0, 1e-12);
  const std::array<double, 3> dominant{1.0, 0.0, 0.0};
  EXPECT_DOUBLE_EQ(detail::effective_sample_size(dominant), 1.0);
  const std::array<double, 2> zero{0.0, 0.0};
  EXPECT_DOUBLE_EQ(detail::effective_sample_size(zero), 0.0);
}

TEST(EngineSelection, AutomaticSwitchesOnGridSize) {
  EXPECT_EQ(resolve_engine(PathEngine::automatic, TimeGrid(1024, 1.0)), PathEngine::cholesky);
  EXPECT_EQ(resolve_engine(PathEngine::automatic, TimeGrid(1025, 1.0)), PathEngine::circulant);
  EXPECT_EQ(resolve_engine(PathEngine::circulant, TimeGrid(8, 1.0)), PathEngine::circulant);
  EXPECT_EQ(resolve_engine(PathEngine::cholesky, TimeGrid(4096, 1.0)), PathEngine::cholesky);
}

TEST(Partition, FreeCaseIsExactlyOne) {
  const SamplerConfig config = importance_config(512, 0.0, 1.0, 7);
  const EstimatorResult z =
      estimate_partition(HurstParameter(0.5), TimeGrid(8, 1.0), 1, config);
  EXPECT_EQ(z.value, 1.0);
  EXPECT_EQ(z.std_error, 0.0);
  EXPECT_EQ(z.ess, 512.0);
  EXPECT_EQ(z.n_samples, 512);
  EXPECT_TRUE(z.reliable);
  EXPECT_EQ(z.method, SamplerMethod::prior_importance);
}

TEST(Partition, WeightsAndValueInUnitInterval) {
  SamplerConfig config = importance_config(800, 0.8, 0.5, 8);
  const Ensemble ens = run_prior_ensemble(HurstParameter(0.5), TimeGrid(12, 1.0), 2, config);
  ASSERT_EQ(ens.r2.size(), 800u);
  for (std::size_t i = 0; i < ens.weight.size(); ++i) {
    EXPECT_GT(ens.weight[i], 0.0);
    EXPECT_LE(ens.weight[i], 1.0);
    EXPECT_GE(ens.local_time[i], 0.0);
  }
  const EstimatorResult z =
      estimate_partition(HurstParameter(0.5), TimeGrid(12, 1.0), 2, config);
  EXPECT_GT(z.value, 0.0);
  EXPECT_LT(z.value, 1.0);
  EXPECT_LT(z.ess, 800.0);
}

TEST(Partition, MatchesIndependentOracle) {
  // library estimate (Cholesky engine, compensated pair sum)
  SamplerConfig config = importance_config(20000, 0.5, 1.0, 9);
  config.engine = PathEngine::cholesky;
  const HurstParameter h(0.5);
  const TimeGrid grid(16, 1.0);
  const EstimatorResult z = estimate_partition(h, grid, 1, config);

  // oracle: different path engine, naive local time, plain mean
  const CirculantSampler sampler(h, grid, 1);
  const std::int64_t reps = 40000;
  double s = 0.0, s2 = 0.0;
  for (std::int64_t r = 0; r < reps; ++r) {
    Rng rng({777, static_cast<std::uint64_t>(r)});
    const double w = std::exp(-0.5 * naive_local_time(sampler.sample(rng), 1.0));
    s += w;
    s2 += w * w;
  }
  const double mean = s / reps;
  const double se = std::sqrt((s2 / reps - mean * mean) / reps);
  EXPECT_NEAR(z.value, mean, 3.0 * std::sqrt(se * se + z.std_error * z.std_error));
}

TEST(R2Estimate, FreeCaseMatchesGaussianMoments) {
  const SamplerConfig config = importance_config(8000, 0.0, 1.0, 10);
  const EstimatorResult r2 =
      estimate_r2(HurstParameter(0.5), TimeGrid(32, 4.0), 3, config);
  // free <R^2> = d N^{2H} = 12; MC error dominated by chi^2 fluctuations
  EXPECT_EQ(r2.n_blocks, 16);
  ASSERT_GT(r2.std_error, 0.0);
  EXPECT_NEAR(r2.value, 12.0, 3.0 * r2.std_error);
  EXPECT_LT(r2.std_error, 0.5);
  EXPECT_TRUE(r2.reliable);
}

TEST(R2Estimate, CirculantEngineAgreesWithAnalyticFreeCase) {
  SamplerConfig config = importance_config(6000, 0.0, 1.0, 11);
  config.engine = PathEngine::circulant;
  const EstimatorResult r2 =
      estimate_r2(HurstParameter(0.7), TimeGrid(64, 2.0), 2, config);
  EXPECT_NEAR(r2.value, 2.0 * std::pow(2.0, 1.4), 3.0 * r2.std_error);
}

TEST(R2Estimate, RepulsionDoesNotShrinkPaths) {
  const HurstParameter h(0.5);
  const TimeGrid grid(16, 1.0);
  const double eps = grid.dt();  // grid-matched width, c = 1
  const EstimatorResult free_case =
      estimate_r2(h, grid, 2, importance_config(20000, 0.0, eps, 12));
  const EstimatorResult coupled =
      estimate_r2(h, grid, 2, importance_config(20000, 1.0, eps, 12));
  const double slack =
      3.0 * std::sqrt(free_case.std_error * free_case.std_error +
                      coupled.std_error * coupled.std_error);
  EXPECT_GT(coupled.value, free_case.value - slack);
  EXPECT_TRUE(coupled.reliable);
}

TEST(Metropolis, FreeCaseAcceptsEverythingAndMatchesMoments) {
  const SamplerConfig config = chain_config(4000, 500, 0.0, 1.0, 13);
  const EstimatorResult r2 = estimate_r2(HurstParameter(0.5), TimeGrid(8, 1.0), 1, config);
  // g = 0: dL never matters, every proposal is accepted
  EXPECT_DOUBLE_EQ(r2.acceptance_rate, 1.0);
  EXPECT_EQ(r2.n_samples, 3500);
  EXPECT_EQ(r2.ess, 3500.0);
  ASSERT_GT(r2.std_error, 0.0);
  EXPECT_NEAR(r2.value, 1.0, 4.0 * r2.std_error);
  // acceptance 1.0 sits outside the [0.05, 0.95] band, so the run is flagged
  EXPECT_FALSE(r2.reliable);
}

TEST(Metropolis, DeterministicGivenStream) {
  const SamplerConfig config = chain_config(2000, 200, 0.4, 0.5, 14);
  const HurstParameter h(0.5);
  const TimeGrid grid(8, 1.0);
  const EstimatorResult a = estimate_r2(h, grid, 2, config);
  const EstimatorResult b = estimate_r2(h, grid, 2, config);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.acceptance_rate, b.acceptance_rate);

  SamplerConfig other = config;
  other.rng = RngStream{15, 0};
  EXPECT_NE(estimate_r2(h, grid, 2, other).value, a.value);
}

TEST(Metropolis, AgreesWithImportanceSampling) {
  const HurstParameter h(0.5);
  const TimeGrid grid(16, 1.0);
  const double eps = 0.25, g = 0.5;
  const EstimatorResult direct = estimate_r2(h, grid, 1, importance_config(20000, g, eps, 16));

  SamplerConfig chain = chain_config(60000, 5000, g, eps, 17);
  chain.proposal_coordinates = 2;
  const EstimatorResult mcmc = estimate_r2(h, grid, 1, chain);
  // prior-redraw proposals at mild coupling accept nearly everything
  EXPECT_GT(mcmc.acceptance_rate, 0.5);
  EXPECT_LT(mcmc.acceptance_rate, 1.0);

  const double combined =
      std::sqrt(direct.std_error * direct.std_error + mcmc.std_error * mcmc.std_error);
  EXPECT_NEAR(mcmc.value, direct.value, 3.0 * combined);
}

TEST(Estimators, MethodAndEngineRejections) {
  const HurstParameter h(0.5);
  const TimeGrid grid(8, 1.0);
  EXPECT_THROW(estimate_partition(h, grid, 1, chain_config(1000, 100, 0.5, 1.0, 18)),
               std::invalid_argument);
  SamplerConfig bad_engine = chain_config(1000, 100, 0.5, 1.0, 19);
  bad_engine.engine = PathEngine::circulant;
  EXPECT_THROW(estimate_r2(h, grid, 1, bad_engine), std::invalid_argument);
  EXPECT_THROW(
      estimate_r2_slab(h, grid, 2, SlabConstraint(1, 2.0), chain_config(1000, 100, 0.5, 1.0, 20)),
      std::invalid_argument);
  EXPECT_THROW(
      estimate_r2_slab(h, grid, 1, SlabConstraint(2, 2.0), importance_config(100, 0.0, 1.0, 21)),
      std::invalid_argument);
}

TEST(Estimators, EssFloorFlagsSmallEffectiveSamples) {
  SamplerConfig config = importance_config(512, 0.0, 1.0, 22);
  config.ess_floor = 513.0;
  const EstimatorResult z = estimate_partition(HurstParameter(0.5), TimeGrid(8, 1.0), 1, config);
  EXPECT_EQ(z.value, 1.0);
  EXPECT_FALSE(z.reliable);
}

TEST(Slab, HugeWidthReproducesUnconstrainedEstimate) {
  const HurstParameter h(0.5);
  const TimeGrid grid(16, 1.0);
  const SamplerConfig config = importance_config(4000, 0.3, 0.5, 23);
  const EstimatorResult unconstrained = estimate_r2(h, grid, 2, config);
  const EstimatorResult wide = estimate_r2_slab(h, grid, 2, SlabConstraint(1, 1e6), config);
  EXPECT_EQ(wide.value, unconstrained.value);
  EXPECT_EQ(wide.std_error, unconstrained.std_error);
  EXPECT_DOUBLE_EQ(wide.survivor_fraction, 1.0);
  EXPECT_TRUE(std::isnan(unconstrained.survivor_fraction));
}

TEST(Slab, ZeroSurvivorsThrows) {
  const SamplerConfig config = importance_config(200, 0.0, 1.0, 24);
  EXPECT_THROW(
      estimate_r2_slab(HurstParameter(0.5), TimeGrid(16, 1.0), 2, SlabConstraint(1, 1e-6),
                       config),
      EmptyEnsembleError);
}

TEST(Slab, FreeCaseConditioningShrinksTheConstrainedCoordinate) {
  // At g = 0 the indicator factorizes across coordinates: it conditions the
  // slab coordinate (strictly reducing its variance) and leaves the
  // transverse ones untouched, so <R^2>_D increases with D toward the
  // unconstrained value from below.
  const HurstParameter h(0.5);
  const TimeGrid grid(16, 1.0);
  const SamplerConfig config = importance_config(60000, 0.0, 1.0, 25);
  const EstimatorResult narrow = estimate_r2_slab(h, grid, 2, SlabConstraint(1, 2.0), config);
  const EstimatorResult wide = estimate_r2_slab(h, grid, 2, SlabConstraint(1, 4.0), config);
  const EstimatorResult unconstrained = estimate_r2(h, grid, 2, config);

  EXPECT_GT(narrow.survivor_fraction, 0.2);
  EXPECT_LT(narrow.survivor_fraction, wide.survivor_fraction);

  const double se_nw =
      3.0 * std::sqrt(narrow.std_error * narrow.std_error + wide.std_error * wide.std_error);
  EXPECT_LT(narrow.value, wide.value - se_nw / 3.0);
  const double se_wu = 3.0 * std::sqrt(wide.std_error * wide.std_error +
                                       unconstrained.std_error * unconstrained.std_error);
  EXPECT_LT(wide.value, unconstrained.value + se_wu);
  EXPECT_LT(narrow.value,
            unconstrained.value - 3.0 * std::sqrt(narrow.std_error * narrow.std_error +
                                                  unconstrained.std_error *
                                                      unconstrained.std_error));
}
