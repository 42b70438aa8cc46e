#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "debias/bootstrap.hpp"
#include "debias/geometry.hpp"
#include "debias/grid.hpp"
#include "debias/kernel.hpp"
#include "debias/rng.hpp"
#include "debias/sample.hpp"

namespace debias {

enum class ScenarioKind { density_1d, levelset_2d, regression_sine, invreg_exp };

// cv means least-squares cross-validation for densities and repeated k-fold
// cross-validation of the local linear smoother for regressions.
enum class BandwidthRule { rot, rot_x2, rot_half, cv, cv_x2, cv_half, fixed };

const char* to_string(ScenarioKind k) noexcept;
const char* to_string(BandwidthRule r) noexcept;
ScenarioKind parse_scenario_kind(const std::string& s);
BandwidthRule parse_bandwidth_rule(const std::string& s);

struct Scenario {
  ScenarioKind kind = ScenarioKind::density_1d;
  std::size_t n = 2000;
  BandwidthRule rule = BandwidthRule::rot;
  double fixed_h = 0.0;  // used by BandwidthRule::fixed
  double tau = 1.0;
  std::size_t replicates = 500;
  std::size_t trials = 200;
  std::vector<double> nominal_levels{0.95};
  std::uint64_t seed = 42;
  Estimator estimator = Estimator::debiased;
  KernelSpec kernel{};            // dim is forced to match the scenario
  std::size_t grid_size = 0;      // 0: 512 points in 1-d, 128 per axis in 2-d
  double level = 0.0;             // 0: 0.25 for level sets, 0.5 for inverse regression
  int cv_folds = 5;
  int cv_repeats = 10;
  unsigned threads = 1;           // trials run in parallel; 0 uses all cores
};

void validate(const Scenario& sc);

struct CoverageRow {
  double nominal = 0.0;
  std::size_t hits = 0;
  std::size_t evaluated = 0;
  double coverage = 0.0;
  double se = 0.0;  // sqrt(c (1 - c) / evaluated)
};

struct CoverageReport {
  Scenario scenario;
  std::vector<CoverageRow> rows;
  std::vector<CoverageRow> normal_rows;  // inverse regression normal-approximation interval
  std::size_t failed_trials = 0;
  std::size_t dropped_replicates = 0;
  std::size_t total_replicates = 0;
  std::vector<double> bandwidths;  // per trial; NaN for failed trials
  double mean_h = 0.0;
};

struct Variant {
  Estimator estimator = Estimator::debiased;
  BandwidthRule rule = BandwidthRule::rot;
};

CoverageReport run_coverage_study(const Scenario& sc);

//! One report per variant. Every variant of a trial sees the same data,
//! the same cross-validation folds, and the same bootstrap resamples.
std::vector<CoverageReport> run_coverage_variants(const Scenario& sc,
                                                  const std::vector<Variant>& variants);

// Data generators and analytic truths.
Sample gen_density_1d(std::size_t n, Rng& rng, std::vector<int>* labels = nullptr);
double true_density_1d(double x);
Sample gen_levelset_2d(std::size_t n, Rng& rng);
double true_density_2d(double x, double y);
PairedSample gen_regression_sine(std::size_t n, Rng& rng);
double true_regression_sine(double x);
PairedSample gen_invreg_exp(std::size_t n, Rng& rng);
double true_regression_invreg(double x);
inline constexpr double kInvregRoot = 0.69314718055994530942;  // log 2

//! Fixed evaluation grid of a scenario; regression scenarios use [0.1, 0.9].
EvalGrid scenario_grid(ScenarioKind kind, std::size_t grid_size);
//! Level set of true_density_2d on a grid refine times finer per axis.
PointSet true_level_set_2d(double level, const EvalGrid& grid, std::size_t refine = 4);

//! lower <= truth <= upper at every grid point with a finite centre.
template <class Truth>
  requires(!std::is_convertible_v<Truth, std::span<const double>>)
bool check_band_covers(const ConfidenceBand& band, Truth&& truth) {
  for (std::size_t g = 0; g < band.center.size(); ++g) {
    if (band.center[g] != band.center[g]) continue;
    const auto p = band.grid.point(g);
    double t;
    if constexpr (std::is_invocable_v<Truth&, double, double>)
      t = band.grid.dim() == 1 ? std::numeric_limits<double>::quiet_NaN() : truth(p[0], p[1]);
    else
      t = truth(p[0]);
    if (!(band.lower[g] <= t && t <= band.upper[g])) return false;
  }
  return true;
}

bool check_band_covers(const ConfidenceBand& band, std::span<const double> truth);
bool check_set_covers(const RegionSet& region, const PointSet& true_set);

}  // namespace debias
