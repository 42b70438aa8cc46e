#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "debias/density.hpp"
#include "debias/geometry.hpp"
#include "debias/grid.hpp"
#include "debias/kernel.hpp"
#include "debias/regression.hpp"
#include "debias/rng.hpp"
#include "debias/sample.hpp"

namespace debias {

enum class Metric { sup, weighted_sup, hausdorff };
enum class Estimator { debiased, plain };
enum class BandKind { fixed, variable };

const char* to_string(Metric m) noexcept;
const char* to_string(Estimator e) noexcept;
const char* to_string(BandKind k) noexcept;

struct BootstrapConfig {
  std::size_t replicates = 500;
  double alpha = 0.05;
  std::uint64_t seed = 42;
  Metric metric = Metric::sup;
  unsigned threads = 1;  // 0: hardware parallelism
};

void validate(const BootstrapConfig& cfg);

// Weighted sup only looks where scale >= kWeightFloor * max(scale).
inline constexpr double kWeightFloor = 0.05;
// At most this fraction of replicates may be dropped as non-finite.
inline constexpr double kDropBudget = 0.10;

//! n draws with replacement from {0, ..., n-1}.
std::vector<std::size_t> resample(std::size_t n, Rng& rng);

//! Multiplicity of each index in one resample.
std::vector<double> resample_counts(std::size_t n, Rng& rng);

//! Multiplicities for replicate r; depends only on (seed, r).
std::vector<double> replicate_counts(std::size_t n, std::uint64_t seed, std::size_t r);

//! max |f1 - f2|, or max |f1 - f2| / sqrt(scale) over points with
//! scale >= kWeightFloor * max(scale). Points where either function is NaN
//! are skipped.
double sup_distance(std::span<const double> f1, std::span<const double> f2,
                    std::span<const double> scale = {});

struct QuantileEstimate {
  double t_hat = 0.0;
  std::vector<double> replicate_stats;  // finite statistics, ascending
  double alpha = 0.05;
  std::size_t dropped = 0;
};

//! 1-based rank ceil((1 - alpha) B) of the upper order statistic.
std::size_t quantile_rank(std::size_t count, double alpha);

//! Drops non-finite statistics (error if more than kDropBudget of them),
//! sorts, and reads the order statistic at quantile_rank.
QuantileEstimate bootstrap_quantile(std::vector<double> stats, double alpha);

//! Re-reads the quantile of cached statistics at another level.
QuantileEstimate requantile(const QuantileEstimate& q, double alpha);

struct ConfidenceBand {
  EvalGrid grid;
  std::vector<double> center;
  std::vector<double> lower;
  std::vector<double> upper;
  double t_hat = 0.0;
  BandKind kind = BandKind::fixed;
  std::vector<double> scale;  // sqrt(p_h) for variable bands, empty otherwise
  QuantileEstimate quantile;
};

ConfidenceBand band_at_level(const ConfidenceBand& band, double alpha);

//! Maps bootstrap multiplicities to estimator values on the grid. Returning
//! an empty vector marks the replicate as failed.
using WeightedEstimator = std::function<std::vector<double>(std::span<const double>)>;

//! Several estimators evaluated together on the same multiplicities; an empty
//! inner vector marks that output's replicate as failed.
using MultiEstimator =
    std::function<std::vector<std::vector<double>>(std::span<const double>)>;

//! Batched form: `counts` holds `count` consecutive rows of n multiplicities
//! and the result holds, per row, one value vector per output.
using BatchEstimator = std::function<std::vector<std::vector<std::vector<double>>>(
    std::span<const double>, std::size_t)>;

//! Replicates are evaluated in chunks of this many, independent of threads.
inline constexpr std::size_t kReplicateChunk = 32;

BatchEstimator batched(MultiEstimator est);

//! One output per entry of `outputs`, read from a single batched evaluation.
//! The evaluator must outlive the returned estimator.
BatchEstimator density_estimator(const DensityEvaluator& ev, std::vector<Estimator> outputs);

//! As density_estimator; a replicate whose local fits exceed the degeneracy
//! budget yields an empty output.
BatchEstimator regression_estimator(const LocalPolyEvaluator& ev, std::vector<Estimator> outputs);

//! Generic sup-metric band: the centre is est(all ones), each replicate
//! statistic is the (weighted) sup distance between est(counts_r) and that
//! centre, weighted by `scale` for weighted_sup. Replicates are independent tasks; replicate r draws only from
//! the stream (cfg.seed, r).
ConfidenceBand bootstrap_band(const WeightedEstimator& est, std::size_t n, const EvalGrid& grid,
                              const BootstrapConfig& cfg, std::vector<double> scale = {});

//! One band per output of est, all from the same resamples.
std::vector<ConfidenceBand> bootstrap_bands(const BatchEstimator& est, std::size_t outputs,
                                            std::size_t n, const EvalGrid& grid,
                                            const BootstrapConfig& cfg,
                                            std::vector<double> scale = {});

ConfidenceBand density_confidence_band(const Sample& s, double h, double tau, KernelSpec k,
                                       const EvalGrid& g, const BootstrapConfig& cfg,
                                       Estimator est = Estimator::debiased);

ConfidenceBand regression_confidence_band(const PairedSample& ps, double h, double tau,
                                          KernelSpec k, const EvalGrid& g,
                                          const BootstrapConfig& cfg,
                                          Estimator est = Estimator::debiased);

struct RegionSet {
  PointSet center;
  double radius = 0.0;
  QuantileEstimate quantile;
};

//! Generic Hausdorff-metric set: centre is the level set of est(all ones);
//! replicates with empty level sets are dropped.
RegionSet bootstrap_level_set(const WeightedEstimator& est, std::size_t n, const EvalGrid& grid,
                              double level, const BootstrapConfig& cfg);

std::vector<RegionSet> bootstrap_level_sets(const BatchEstimator& est, std::size_t outputs,
                                            std::size_t n, const EvalGrid& grid, double level,
                                            const BootstrapConfig& cfg);

RegionSet levelset_confidence_set(const Sample& s, double level, double h, double tau,
                                  KernelSpec k, const EvalGrid& g, const BootstrapConfig& cfg,
                                  Estimator est = Estimator::debiased);

//! Grid mask of |center - level| < t_hat for a fixed-width density band.
std::vector<std::uint8_t> levelset_inversion_set(const ConfidenceBand& band, double level);

struct InverseRegressionSet {
  RegionSet region;
  double center_root = 0.0;             // first root of the centre estimate
  std::vector<double> replicate_roots;  // per kept replicate, root closest to center_root
  double non_singleton_fraction = 0.0;  // kept replicates with != 1 root
};

//! Root-set version of bootstrap_level_sets on a 1-d grid.
std::vector<InverseRegressionSet> bootstrap_root_sets(const BatchEstimator& est,
                                                      std::size_t outputs, std::size_t n,
                                                      const EvalGrid& grid, double r0,
                                                      const BootstrapConfig& cfg);

InverseRegressionSet invreg_confidence_set(const PairedSample& ps, double r0, double h,
                                           double tau, KernelSpec k, const EvalGrid& g,
                                           const BootstrapConfig& cfg,
                                           Estimator est = Estimator::debiased);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

//! [x0 + z_(alpha/2) sd, x0 + z_(1-alpha/2) sd] with sd the sample standard
//! deviation of the bootstrap roots.
Interval invreg_normal_ci(double center_root, std::span<const double> bootstrap_roots,
                          double alpha);

double normal_quantile(double p);

}  // namespace debias
