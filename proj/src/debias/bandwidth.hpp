#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "debias/kernel.hpp"
#include "debias/sample.hpp"

namespace debias {

enum class BandwidthMethod { rot, lscv, kfold_cv, fixed };

const char* to_string(BandwidthMethod m) noexcept;

struct BandwidthChoice {
  double h = 0.0;
  BandwidthMethod method = BandwidthMethod::fixed;
  std::vector<std::pair<double, double>> diagnostics;  // (candidate h, score)
};

// Scores within this distance of the minimum count as ties; the smallest
// candidate among ties wins.
inline constexpr double kScoreTieTolerance = 1e-12;

//! d = 1: 0.9 min(sd, IQR / 1.34) n^(-1/5).
//! d = 2: geometric-mean sd times (4 / ((d + 2) n))^(1 / (d + 4)).
BandwidthChoice rule_of_thumb(const Sample& s);

//! Dispersion the rule of thumb is proportional to: min(sd, IQR / 1.34)
//! for d = 1, geometric mean of per-axis sd for d = 2.
double dispersion_scale(const Sample& s);

BandwidthChoice lscv_bandwidth(const Sample& s, std::span<const double> candidates,
                               KernelSpec k = {}, unsigned threads = 1);

//! Repeated k-fold cross-validation of the local linear smoother.
//!
//! Rows are first put in canonical (x, y) order and each repeat shuffles
//! that order with a stream derived from (seed, repeat), so the result
//! does not depend on the order of the input rows. Held-out points whose
//! training-fold fit is degenerate are skipped; a candidate with no usable
//! prediction scores +inf.
BandwidthChoice kfold_cv_bandwidth(const PairedSample& ps, int folds, int repeats,
                                   std::span<const double> candidates, std::uint64_t seed,
                                   KernelSpec k = {}, unsigned threads = 1);

std::vector<double> log_spaced(double lo, double hi, std::size_t count);

//! 20 log-spaced values in [0.05, 1] x dispersion_scale.
std::vector<double> default_lscv_candidates(const Sample& s);

//! 20 log-spaced values in [0.25, 4] x (range / 4) n^(-1/5).
std::vector<double> default_cv_candidates(const PairedSample& ps);

//! Quantile with linear interpolation between order statistics.
double sample_quantile(std::vector<double> values, double p);

double sample_sd(std::span<const double> values);

}  // namespace debias
