#include "debias/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <boost/math/distributions/normal.hpp>

#include "debias/bandwidth.hpp"
#include "debias/density.hpp"
#include "debias/error.hpp"
#include "debias/parallel.hpp"
#include "debias/regression.hpp"

namespace debias {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void fill_band(ConfidenceBand& band) {
  const std::size_t G = band.center.size();
  band.lower.resize(G);
  band.upper.resize(G);
  for (std::size_t g = 0; g < G; ++g) {
    const double half = band.kind == BandKind::fixed ? band.t_hat : band.t_hat * band.scale[g];
    band.lower[g] = band.center[g] - half;
    band.upper[g] = band.center[g] + half;
  }
}

std::vector<std::vector<double>> center_outputs(const BatchEstimator& est, std::size_t n) {
  auto rows = est(std::vector<double>(n, 1.0), 1);
  if (rows.size() != 1) fail(ErrorCode::invalid_argument, "batch estimator returned the wrong row count");
  return std::move(rows.front());
}

// Calls fn(r, outputs of replicate r) for every replicate. Chunks of
// kReplicateChunk replicates are the parallel tasks.
template <class Fn>
void for_each_replicate(const BatchEstimator& est, std::size_t n, const BootstrapConfig& cfg, Fn&& fn) {
  const std::size_t B = cfg.replicates;
  const std::size_t chunks = (B + kReplicateChunk - 1) / kReplicateChunk;
  parallel_for(chunks, cfg.threads, [&](std::size_t c) {
    const std::size_t r0 = c * kReplicateChunk;
    const std::size_t count = std::min(kReplicateChunk, B - r0);
    std::vector<double> counts(count * n);
    for (std::size_t j = 0; j < count; ++j) {
      auto w = replicate_counts(n, cfg.seed, r0 + j);
      std::copy(w.begin(), w.end(), counts.begin() + static_cast<std::ptrdiff_t>(j * n));
    }
    auto rows = est(counts, count);
    if (rows.size() != count) fail(ErrorCode::invalid_argument, "batch estimator returned the wrong row count");
    for (std::size_t j = 0; j < count; ++j) fn(r0 + j, rows[j]);
  });
}

}  // namespace

BatchEstimator batched(MultiEstimator est) {
  return [est = std::move(est)](std::span<const double> counts, std::size_t count) {
    const std::size_t n = count == 0 ? 0 : counts.size() / count;
    std::vector<std::vector<std::vector<double>>> rows(count);
    for (std::size_t j = 0; j < count; ++j) rows[j] = est(counts.subspan(j * n, n));
    return rows;
  };
}

BatchEstimator density_estimator(const DensityEvaluator& ev, std::vector<Estimator> outputs) {
  return [&ev, outputs = std::move(outputs)](std::span<const double> counts, std::size_t count) {
    std::vector<DensityEvaluator::Values> vals;
    ev.evaluate_batch(counts, count, vals);
    std::vector<std::vector<std::vector<double>>> rows(count);
    for (std::size_t j = 0; j < count; ++j)
      for (Estimator e : outputs)
        rows[j].push_back(e == Estimator::debiased ? vals[j].debiased : vals[j].plain);
    return rows;
  };
}

BatchEstimator regression_estimator(const LocalPolyEvaluator& ev, std::vector<Estimator> outputs) {
  return [&ev, outputs = std::move(outputs)](std::span<const double> counts, std::size_t count) {
    std::vector<LocalPolyEvaluator::Values> vals;
    ev.evaluate_batch(counts, count, vals);
    const double limit = kDegenerateBudget * static_cast<double>(ev.grid().size());
    std::vector<std::vector<std::vector<double>>> rows(count);
    for (std::size_t j = 0; j < count; ++j) {
      const bool linear_ok = static_cast<double>(vals[j].linear_failures) <= limit;
      const bool cubic_ok = static_cast<double>(vals[j].cubic_failures) <= limit;
      for (Estimator e : outputs) {
        if (!linear_ok || (e == Estimator::debiased && !cubic_ok))
          rows[j].emplace_back();
        else
          rows[j].push_back(e == Estimator::debiased ? vals[j].debiased : vals[j].linear);
      }
    }
    return rows;
  };
}

const char* to_string(Metric m) noexcept {
  switch (m) {
    case Metric::sup: return "sup";
    case Metric::weighted_sup: return "weighted_sup";
    case Metric::hausdorff: return "hausdorff";
  }
  return "sup";
}

const char* to_string(Estimator e) noexcept { return e == Estimator::debiased ? "debiased" : "plain"; }

const char* to_string(BandKind k) noexcept { return k == BandKind::fixed ? "fixed" : "variable"; }

void validate(const BootstrapConfig& cfg) {
  if (cfg.replicates < 1) fail(ErrorCode::invalid_argument, "bootstrap needs at least one replicate");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0))
    fail(ErrorCode::invalid_argument, "alpha must lie in (0, 1)");
}

std::vector<std::size_t> resample(std::size_t n, Rng& rng) {
  if (n < 1) fail(ErrorCode::invalid_argument, "cannot resample an empty sample");
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

std::vector<double> resample_counts(std::size_t n, Rng& rng) {
  std::vector<double> counts(n, 0.0);
  for (std::size_t i : resample(n, rng)) counts[i] += 1.0;
  return counts;
}

std::vector<double> replicate_counts(std::size_t n, std::uint64_t seed, std::size_t r) {
  Rng rng = make_stream(seed, r);
  return resample_counts(n, rng);
}

double sup_distance(std::span<const double> f1, std::span<const double> f2,
                    std::span<const double> scale) {
  if (f1.size() != f2.size()) fail(ErrorCode::dimension_mismatch, "sup distance of unequal lengths");
  if (!scale.empty() && scale.size() != f1.size())
    fail(ErrorCode::dimension_mismatch, "scale length does not match");
  double floor = -1.0;
  if (!scale.empty()) {
    double mx = 0.0;
    for (double s : scale)
      if (std::isfinite(s)) mx = std::max(mx, s);
    floor = kWeightFloor * mx;
    if (!(mx > 0.0)) fail(ErrorCode::empty_set, "weighted sup has no admissible point");
  }
  double best = 0.0;
  bool any = false;
  for (std::size_t g = 0; g < f1.size(); ++g) {
    if (std::isnan(f1[g]) || std::isnan(f2[g])) continue;
    double d = std::abs(f1[g] - f2[g]);
    if (!scale.empty()) {
      if (!(scale[g] >= floor)) continue;
      d /= std::sqrt(scale[g]);
    }
    any = true;
    best = std::max(best, d);
  }
  if (!any) fail(ErrorCode::empty_set, "sup distance has no admissible point");
  return best;
}

std::size_t quantile_rank(std::size_t count, double alpha) {
  // The small offset keeps e.g. (1 - 0.1) * 10 from rounding up to rank 10.
  double r = std::ceil((1.0 - alpha) * static_cast<double>(count) - 1e-9);
  return static_cast<std::size_t>(std::clamp(r, 1.0, static_cast<double>(count)));
}

QuantileEstimate bootstrap_quantile(std::vector<double> stats, double alpha) {
  if (stats.empty()) fail(ErrorCode::invalid_argument, "no bootstrap statistics");
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorCode::invalid_argument, "alpha must lie in (0, 1)");
  const std::size_t total = stats.size();
  std::erase_if(stats, [](double v) { return !std::isfinite(v); });
  const std::size_t dropped = total - stats.size();
  if (static_cast<double>(dropped) > kDropBudget * static_cast<double>(total) || stats.empty())
    fail(ErrorCode::budget_exceeded, std::to_string(dropped) + " of " + std::to_string(total) +
                                         " bootstrap replicates failed");
  std::sort(stats.begin(), stats.end());
  QuantileEstimate q;
  q.alpha = alpha;
  q.dropped = dropped;
  q.t_hat = stats[quantile_rank(stats.size(), alpha) - 1];
  q.replicate_stats = std::move(stats);
  return q;
}

QuantileEstimate requantile(const QuantileEstimate& q, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorCode::invalid_argument, "alpha must lie in (0, 1)");
  QuantileEstimate out = q;
  out.alpha = alpha;
  out.t_hat = q.replicate_stats[quantile_rank(q.replicate_stats.size(), alpha) - 1];
  return out;
}

ConfidenceBand band_at_level(const ConfidenceBand& band, double alpha) {
  ConfidenceBand out = band;
  out.quantile = requantile(band.quantile, alpha);
  out.t_hat = out.quantile.t_hat;
  fill_band(out);
  return out;
}

std::vector<ConfidenceBand> bootstrap_bands(const BatchEstimator& est, std::size_t outputs,
                                            std::size_t n, const EvalGrid& grid,
                                            const BootstrapConfig& cfg,
                                            std::vector<double> scale) {
  validate(cfg);
  if (cfg.metric == Metric::hausdorff)
    fail(ErrorCode::invalid_argument, "bands use the sup or weighted sup metric");
  const bool weighted = cfg.metric == Metric::weighted_sup;
  if (weighted && scale.size() != grid.size())
    fail(ErrorCode::invalid_argument, "weighted sup needs a scale per grid point");
  const std::span<const double> weight_span =
      weighted ? std::span<const double>(scale) : std::span<const double>();

  auto centers = center_outputs(est, n);
  if (centers.size() != outputs) fail(ErrorCode::invalid_argument, "estimator output count mismatch");
  for (const auto& c : centers)
    if (c.size() != grid.size()) fail(ErrorCode::degenerate, "estimate on the original sample failed");

  std::vector<std::vector<double>> stats(outputs, std::vector<double>(cfg.replicates, kNaN));
  for_each_replicate(est, n, cfg, [&](std::size_t r, std::vector<std::vector<double>>& values) {
    for (std::size_t o = 0; o < outputs && o < values.size(); ++o) {
      if (values[o].size() != grid.size()) continue;
      try {
        stats[o][r] = sup_distance(values[o], centers[o], weight_span);
      } catch (const Error&) {
        stats[o][r] = kNaN;
      }
    }
  });

  std::vector<double> root_scale;
  if (weighted) {
    root_scale.resize(scale.size());
    for (std::size_t g = 0; g < scale.size(); ++g) root_scale[g] = std::sqrt(std::max(scale[g], 0.0));
  }
  std::vector<ConfidenceBand> bands(outputs);
  for (std::size_t o = 0; o < outputs; ++o) {
    ConfidenceBand& band = bands[o];
    band.grid = grid;
    band.center = std::move(centers[o]);
    band.kind = weighted ? BandKind::variable : BandKind::fixed;
    band.scale = root_scale;
    band.quantile = bootstrap_quantile(std::move(stats[o]), cfg.alpha);
    band.t_hat = band.quantile.t_hat;
    fill_band(band);
  }
  return bands;
}

ConfidenceBand bootstrap_band(const WeightedEstimator& est, std::size_t n, const EvalGrid& grid,
                              const BootstrapConfig& cfg, std::vector<double> scale) {
  auto bands = bootstrap_bands(
      batched([&](std::span<const double> w) { return std::vector<std::vector<double>>{est(w)}; }), 1, n,
      grid, cfg, std::move(scale));
  return std::move(bands.front());
}

ConfidenceBand density_confidence_band(const Sample& s, double h, double tau, KernelSpec k,
                                       const EvalGrid& g, const BootstrapConfig& cfg,
                                       Estimator est) {
  if (cfg.metric != Metric::sup && cfg.metric != Metric::weighted_sup)
    fail(ErrorCode::invalid_argument, "density bands use the sup or weighted sup metric");
  DensityEvaluator ev(s, g, k, h, tau,
                      est == Estimator::debiased ? DensityParts::both : DensityParts::plain);
  std::vector<double> scale;
  // Variable-width bands scale by the plain estimate, which is non-negative.
  if (cfg.metric == Metric::weighted_sup) scale = ev.evaluate().plain;
  return std::move(bootstrap_bands(density_estimator(ev, {est}), 1, s.size(), g, cfg, std::move(scale)).front());
}

ConfidenceBand regression_confidence_band(const PairedSample& ps, double h, double tau,
                                          KernelSpec k, const EvalGrid& g,
                                          const BootstrapConfig& cfg, Estimator est) {
  if (cfg.metric != Metric::sup) fail(ErrorCode::invalid_argument, "regression bands use the sup metric");
  LocalPolyEvaluator ev(ps, g, k, h, tau,
                        est == Estimator::debiased ? RegressionParts::both : RegressionParts::linear);
  {
    auto center = ev.evaluate();
    check_degenerate_budget(center.linear_failures, g.size(), "local linear fit");
    if (est == Estimator::debiased)
      check_degenerate_budget(center.cubic_failures, g.size(), "local cubic fit");
  }
  return std::move(bootstrap_bands(regression_estimator(ev, {est}), 1, ps.size(), g, cfg).front());
}

std::vector<RegionSet> bootstrap_level_sets(const BatchEstimator& est, std::size_t outputs,
                                            std::size_t n, const EvalGrid& grid, double level,
                                            const BootstrapConfig& cfg) {
  validate(cfg);
  auto center_values = center_outputs(est, n);
  if (center_values.size() != outputs) fail(ErrorCode::invalid_argument, "estimator output count mismatch");
  std::vector<RegionSet> out(outputs, RegionSet{PointSet(grid.dim()), 0.0, {}});
  for (std::size_t o = 0; o < outputs; ++o) {
    if (center_values[o].size() != grid.size())
      fail(ErrorCode::degenerate, "estimate on the original sample failed");
    out[o].center = extract_level_set(center_values[o], grid, level);
    if (out[o].center.empty()) fail(ErrorCode::empty_set, "the estimated level set is empty on the grid");
  }

  std::vector<std::vector<double>> stats(outputs, std::vector<double>(cfg.replicates, kNaN));
  for_each_replicate(est, n, cfg, [&](std::size_t r, std::vector<std::vector<double>>& values) {
    for (std::size_t o = 0; o < outputs && o < values.size(); ++o) {
      if (values[o].size() != grid.size()) continue;
      auto set = extract_level_set(values[o], grid, level);
      if (!set.empty()) stats[o][r] = hausdorff(set, out[o].center);
    }
  });
  for (std::size_t o = 0; o < outputs; ++o) {
    out[o].quantile = bootstrap_quantile(std::move(stats[o]), cfg.alpha);
    out[o].radius = out[o].quantile.t_hat;
  }
  return out;
}

RegionSet bootstrap_level_set(const WeightedEstimator& est, std::size_t n, const EvalGrid& grid,
                              double level, const BootstrapConfig& cfg) {
  auto sets = bootstrap_level_sets(
      batched([&](std::span<const double> w) { return std::vector<std::vector<double>>{est(w)}; }), 1, n,
      grid, level, cfg);
  return std::move(sets.front());
}

RegionSet levelset_confidence_set(const Sample& s, double level, double h, double tau,
                                  KernelSpec k, const EvalGrid& g, const BootstrapConfig& cfg,
                                  Estimator est) {
  if (cfg.metric != Metric::hausdorff)
    fail(ErrorCode::invalid_argument, "level-set confidence sets use the Hausdorff metric");
  DensityEvaluator ev(s, g, k, h, tau,
                      est == Estimator::debiased ? DensityParts::both : DensityParts::plain);
  return std::move(bootstrap_level_sets(density_estimator(ev, {est}), 1, s.size(), g, level, cfg).front());
}

std::vector<std::uint8_t> levelset_inversion_set(const ConfidenceBand& band, double level) {
  if (band.kind != BandKind::fixed)
    fail(ErrorCode::invalid_argument, "inversion sets need a fixed-width band");
  std::vector<std::uint8_t> mask(band.center.size(), 0);
  for (std::size_t g = 0; g < mask.size(); ++g)
    mask[g] = std::abs(band.center[g] - level) < band.t_hat ? 1 : 0;
  return mask;
}

std::vector<InverseRegressionSet> bootstrap_root_sets(const BatchEstimator& est,
                                                      std::size_t outputs, std::size_t n,
                                                      const EvalGrid& grid, double r0,
                                                      const BootstrapConfig& cfg) {
  validate(cfg);
  if (grid.dim() != 1) fail(ErrorCode::invalid_argument, "root sets need a 1-d grid");
  auto center_values = center_outputs(est, n);
  if (center_values.size() != outputs) fail(ErrorCode::invalid_argument, "estimator output count mismatch");
  std::vector<InverseRegressionSet> out(outputs);
  for (std::size_t o = 0; o < outputs; ++o) {
    if (center_values[o].size() != grid.size())
      fail(ErrorCode::degenerate, "regression fit on the original sample is degenerate");
    out[o].region.center = extract_level_set_1d(center_values[o], grid, r0);
    if (out[o].region.center.empty())
      fail(ErrorCode::empty_set, "the fitted curve never reaches r0 on the grid");
    out[o].center_root = out[o].region.center.point(0)[0];
  }

  const std::size_t B = cfg.replicates;
  std::vector<std::vector<double>> stats(outputs, std::vector<double>(B, kNaN));
  std::vector<std::vector<double>> closest(outputs, std::vector<double>(B, kNaN));
  std::vector<std::vector<std::uint8_t>> singleton(outputs, std::vector<std::uint8_t>(B, 0));
  for_each_replicate(est, n, cfg, [&](std::size_t r, std::vector<std::vector<double>>& values) {
    for (std::size_t o = 0; o < outputs && o < values.size(); ++o) {
      if (values[o].size() != grid.size()) continue;
      auto roots = extract_level_set_1d(values[o], grid, r0);
      if (roots.empty()) continue;
      stats[o][r] = hausdorff(roots, out[o].region.center);
      singleton[o][r] = roots.size() == 1 ? 1 : 0;
      const double x0 = out[o].center_root;
      double best = roots.point(0)[0];
      for (std::size_t i = 1; i < roots.size(); ++i) {
        const double x = roots.point(i)[0];
        if (std::abs(x - x0) < std::abs(best - x0)) best = x;
      }
      closest[o][r] = best;
    }
  });
  for (std::size_t o = 0; o < outputs; ++o) {
    std::size_t kept = 0, multi = 0;
    for (std::size_t r = 0; r < B; ++r) {
      if (std::isnan(stats[o][r])) continue;
      ++kept;
      multi += singleton[o][r] ? 0 : 1;
      out[o].replicate_roots.push_back(closest[o][r]);
    }
    out[o].region.quantile = bootstrap_quantile(std::move(stats[o]), cfg.alpha);
    out[o].region.radius = out[o].region.quantile.t_hat;
    out[o].non_singleton_fraction =
        kept == 0 ? 0.0 : static_cast<double>(multi) / static_cast<double>(kept);
  }
  return out;
}

InverseRegressionSet invreg_confidence_set(const PairedSample& ps, double r0, double h,
                                           double tau, KernelSpec k, const EvalGrid& g,
                                           const BootstrapConfig& cfg, Estimator est) {
  if (cfg.metric != Metric::hausdorff)
    fail(ErrorCode::invalid_argument, "inverse-regression sets use the Hausdorff metric");
  LocalPolyEvaluator ev(ps, g, k, h, tau,
                        est == Estimator::debiased ? RegressionParts::both : RegressionParts::linear);
  return std::move(bootstrap_root_sets(regression_estimator(ev, {est}), 1, ps.size(), g, r0, cfg).front());
}

double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

Interval invreg_normal_ci(double center_root, std::span<const double> bootstrap_roots,
                          double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorCode::invalid_argument, "alpha must lie in (0, 1)");
  std::vector<double> roots;
  for (double r : bootstrap_roots)
    if (std::isfinite(r)) roots.push_back(r);
  if (roots.size() < 2) fail(ErrorCode::invalid_argument, "normal interval needs at least 2 bootstrap roots");
  const double sd = sample_sd(roots);
  const double z = normal_quantile(1.0 - alpha / 2.0);
  return {center_root - z * sd, center_root + z * sd};
}

}  // namespace debias
