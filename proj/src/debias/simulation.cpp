#include "debias/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <random>

#include "debias/bandwidth.hpp"
#include "debias/density.hpp"
#include "debias/error.hpp"
#include "debias/parallel.hpp"
#include "debias/regression.hpp"

namespace debias {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kTrialFailureBudget = 0.10;

// Level-set box: every mixture component lies at least 4 sd inside it.
constexpr double kBoxLo[2] = {-1.2, -1.2};
constexpr double kBoxHi[2] = {2.7, 1.7};
constexpr double kDensityLo = -3.0;
constexpr double kDensityHi = 7.0;
// Regression designs are uniform on [0, 1]; bands and roots are judged on a
// compact interior set where both local fits have two-sided windows.
constexpr double kRegressionLo = 0.1;
constexpr double kRegressionHi = 0.9;

double phi(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

bool is_density(ScenarioKind k) {
  return k == ScenarioKind::density_1d || k == ScenarioKind::levelset_2d;
}

bool uses_rot(BandwidthRule r) {
  return r == BandwidthRule::rot || r == BandwidthRule::rot_x2 || r == BandwidthRule::rot_half;
}

bool uses_cv(BandwidthRule r) {
  return r == BandwidthRule::cv || r == BandwidthRule::cv_x2 || r == BandwidthRule::cv_half;
}

double rule_factor(BandwidthRule r) {
  switch (r) {
    case BandwidthRule::rot_x2:
    case BandwidthRule::cv_x2: return 2.0;
    case BandwidthRule::rot_half:
    case BandwidthRule::cv_half: return 0.5;
    default: return 1.0;
  }
}

double scenario_level(const Scenario& sc) {
  if (sc.level != 0.0) return sc.level;
  return sc.kind == ScenarioKind::invreg_exp ? 0.5 : 0.25;
}

std::size_t scenario_grid_size(const Scenario& sc) {
  if (sc.grid_size != 0) return sc.grid_size;
  return sc.kind == ScenarioKind::levelset_2d ? 128 : 512;
}

KernelSpec scenario_kernel(const Scenario& sc) {
  KernelSpec k = sc.kernel;
  k.dim = sc.kind == ScenarioKind::levelset_2d ? 2 : 1;
  return k;
}

struct VariantOutcome {
  bool failed = false;
  double h = kNaN;
  std::vector<std::uint8_t> hits;
  std::vector<std::uint8_t> normal_hits;
  std::size_t dropped = 0;
  std::size_t total = 0;
};

struct TrialContext {
  const Scenario& sc;
  const std::vector<Variant>& variants;
  KernelSpec kernel;
  double level;
  std::size_t grid_size;
  std::optional<EvalGrid> fixed_grid;
  std::vector<double> fixed_truth;         // truth on fixed_grid (density_1d)
  std::optional<PointSet> truth_set;       // level set or root set
};

std::vector<double> alphas(const Scenario& sc) {
  std::vector<double> a;
  for (double l : sc.nominal_levels) a.push_back(1.0 - l);
  return a;
}

BootstrapConfig trial_config(const Scenario& sc, std::uint64_t seed, Metric metric) {
  BootstrapConfig cfg;
  cfg.replicates = sc.replicates;
  cfg.alpha = 1.0 - sc.nominal_levels.back();
  cfg.seed = seed;
  cfg.metric = metric;
  cfg.threads = 1;
  return cfg;
}

void record_band(VariantOutcome& out, const ConfidenceBand& band, std::span<const double> truth,
                 const std::vector<double>& a) {
  for (std::size_t l = 0; l < a.size(); ++l)
    out.hits[l] = check_band_covers(band_at_level(band, a[l]), truth) ? 1 : 0;
  out.dropped = band.quantile.dropped;
}

void record_set(VariantOutcome& out, const RegionSet& region, const PointSet& truth,
                const std::vector<double>& a) {
  for (std::size_t l = 0; l < a.size(); ++l) {
    const double r = requantile(region.quantile, a[l]).t_hat;
    out.hits[l] = dilation_covers(region.center, r, truth) ? 1 : 0;
  }
  out.dropped = region.quantile.dropped;
}

std::vector<VariantOutcome> run_trial(const TrialContext& ctx, std::size_t m) {
  const Scenario& sc = ctx.sc;
  const std::size_t V = ctx.variants.size();
  const auto a = alphas(sc);
  std::vector<VariantOutcome> out(V);
  for (auto& o : out) {
    o.hits.assign(a.size(), 0);
    if (sc.kind == ScenarioKind::invreg_exp) o.normal_hits.assign(a.size(), 0);
    o.total = sc.replicates;
  }

  const std::uint64_t trial_seed = derive_seed(sc.seed, m);
  Rng data_rng = make_stream(trial_seed, stream_tag::data);
  const std::uint64_t cv_seed = derive_seed(trial_seed, stream_tag::cv);
  const std::uint64_t boot_seed = derive_seed(trial_seed, stream_tag::bootstrap);

  const bool need_rot = std::any_of(ctx.variants.begin(), ctx.variants.end(),
                                    [](const Variant& v) { return uses_rot(v.rule); });
  const bool need_cv = std::any_of(ctx.variants.begin(), ctx.variants.end(),
                                   [](const Variant& v) { return uses_cv(v.rule); });

  auto fail_all = [&](const std::vector<std::size_t>& idx) {
    for (std::size_t v : idx) out[v].failed = true;
  };

  std::optional<Sample> sample;
  std::optional<PairedSample> paired;
  double h_rot = kNaN, h_cv = kNaN;
  std::vector<std::size_t> all(V);
  for (std::size_t v = 0; v < V; ++v) all[v] = v;
  try {
    switch (sc.kind) {
      case ScenarioKind::density_1d: sample = gen_density_1d(sc.n, data_rng); break;
      case ScenarioKind::levelset_2d: sample = gen_levelset_2d(sc.n, data_rng); break;
      case ScenarioKind::regression_sine: paired = gen_regression_sine(sc.n, data_rng); break;
      case ScenarioKind::invreg_exp: paired = gen_invreg_exp(sc.n, data_rng); break;
    }
    if (sample) {
      if (need_rot) h_rot = rule_of_thumb(*sample).h;
      if (need_cv) h_cv = lscv_bandwidth(*sample, default_lscv_candidates(*sample), ctx.kernel, 1).h;
    } else if (need_cv) {
      h_cv = kfold_cv_bandwidth(*paired, sc.cv_folds, sc.cv_repeats, default_cv_candidates(*paired),
                                cv_seed, ctx.kernel, 1)
                 .h;
    }
  } catch (const Error&) {
    fail_all(all);
    return out;
  }

  // Variants sharing a bandwidth share one evaluator and one bootstrap run.
  std::map<double, std::vector<std::size_t>> groups;
  for (std::size_t v = 0; v < V; ++v) {
    const BandwidthRule r = ctx.variants[v].rule;
    const double h = r == BandwidthRule::fixed ? sc.fixed_h
                     : uses_rot(r)            ? h_rot * rule_factor(r)
                                              : h_cv * rule_factor(r);
    out[v].h = h;
    groups[h].push_back(v);
  }

  for (const auto& [h, members] : groups) {
    try {
      bool any_debiased = false;
      for (std::size_t v : members) any_debiased |= ctx.variants[v].estimator == Estimator::debiased;
      const std::size_t K = members.size();
      std::vector<Estimator> estimators;
      for (std::size_t v : members) estimators.push_back(ctx.variants[v].estimator);

      if (sample) {
        const EvalGrid& grid = *ctx.fixed_grid;
        DensityEvaluator ev(*sample, grid, ctx.kernel, h, sc.tau,
                            any_debiased ? DensityParts::both : DensityParts::plain);
        const BatchEstimator est = density_estimator(ev, estimators);
        if (sc.kind == ScenarioKind::density_1d) {
          auto bands = bootstrap_bands(est, K, sample->size(), grid,
                                       trial_config(sc, boot_seed, Metric::sup));
          for (std::size_t j = 0; j < K; ++j) record_band(out[members[j]], bands[j], ctx.fixed_truth, a);
        } else {
          auto sets = bootstrap_level_sets(est, K, sample->size(), grid, ctx.level,
                                           trial_config(sc, boot_seed, Metric::hausdorff));
          for (std::size_t j = 0; j < K; ++j) record_set(out[members[j]], sets[j], *ctx.truth_set, a);
        }
      } else {
        const EvalGrid& grid = *ctx.fixed_grid;
        LocalPolyEvaluator ev(*paired, grid, ctx.kernel, h, sc.tau,
                              any_debiased ? RegressionParts::both : RegressionParts::linear);
        const BatchEstimator est = regression_estimator(ev, estimators);
        if (sc.kind == ScenarioKind::regression_sine) {
          auto bands = bootstrap_bands(est, K, paired->size(), grid,
                                       trial_config(sc, boot_seed, Metric::sup));
          std::vector<double> truth(grid.size());
          for (std::size_t g = 0; g < grid.size(); ++g) truth[g] = true_regression_sine(grid.point(g)[0]);
          for (std::size_t j = 0; j < K; ++j) record_band(out[members[j]], bands[j], truth, a);
        } else {
          auto sets = bootstrap_root_sets(est, K, paired->size(), grid, ctx.level,
                                          trial_config(sc, boot_seed, Metric::hausdorff));
          for (std::size_t j = 0; j < K; ++j) {
            VariantOutcome& o = out[members[j]];
            record_set(o, sets[j].region, *ctx.truth_set, a);
            for (std::size_t l = 0; l < a.size(); ++l) {
              try {
                const Interval ci = invreg_normal_ci(sets[j].center_root, sets[j].replicate_roots, a[l]);
                o.normal_hits[l] = ci.lower <= kInvregRoot && kInvregRoot <= ci.upper ? 1 : 0;
              } catch (const Error&) {
                o.normal_hits[l] = 0;
              }
            }
          }
        }
      }
    } catch (const Error&) {
      fail_all(members);
    }
  }
  return out;
}

std::vector<CoverageRow> aggregate(const std::vector<double>& levels,
                                   const std::vector<std::vector<VariantOutcome>>& trials,
                                   std::size_t v, bool normal) {
  std::vector<CoverageRow> rows(levels.size());
  for (std::size_t l = 0; l < levels.size(); ++l) {
    CoverageRow& row = rows[l];
    row.nominal = levels[l];
    for (const auto& t : trials) {
      if (t[v].failed) continue;
      ++row.evaluated;
      row.hits += normal ? t[v].normal_hits[l] : t[v].hits[l];
    }
    if (row.evaluated > 0) {
      const double c = static_cast<double>(row.hits) / static_cast<double>(row.evaluated);
      row.coverage = c;
      row.se = std::sqrt(c * (1.0 - c) / static_cast<double>(row.evaluated));
    }
  }
  return rows;
}

}  // namespace

const char* to_string(ScenarioKind k) noexcept {
  switch (k) {
    case ScenarioKind::density_1d: return "density_1d";
    case ScenarioKind::levelset_2d: return "levelset_2d";
    case ScenarioKind::regression_sine: return "regression_sine";
    case ScenarioKind::invreg_exp: return "invreg_exp";
  }
  return "density_1d";
}

const char* to_string(BandwidthRule r) noexcept {
  switch (r) {
    case BandwidthRule::rot: return "rot";
    case BandwidthRule::rot_x2: return "rot_x2";
    case BandwidthRule::rot_half: return "rot_half";
    case BandwidthRule::cv: return "cv";
    case BandwidthRule::cv_x2: return "cv_x2";
    case BandwidthRule::cv_half: return "cv_half";
    case BandwidthRule::fixed: return "fixed";
  }
  return "rot";
}

ScenarioKind parse_scenario_kind(const std::string& s) {
  for (auto k : {ScenarioKind::density_1d, ScenarioKind::levelset_2d, ScenarioKind::regression_sine,
                 ScenarioKind::invreg_exp})
    if (s == to_string(k)) return k;
  fail(ErrorCode::invalid_argument, "unknown scenario '" + s + "'");
}

BandwidthRule parse_bandwidth_rule(const std::string& s) {
  for (auto r : {BandwidthRule::rot, BandwidthRule::rot_x2, BandwidthRule::rot_half, BandwidthRule::cv,
                 BandwidthRule::cv_x2, BandwidthRule::cv_half, BandwidthRule::fixed})
    if (s == to_string(r)) return r;
  fail(ErrorCode::invalid_argument, "unknown bandwidth rule '" + s + "'");
}

void validate(const Scenario& sc) {
  require(sc.n >= 20, "scenario needs n >= 20");
  require(sc.trials >= 1, "scenario needs at least one trial");
  require(sc.replicates >= 1, "scenario needs at least one bootstrap replicate");
  require(!sc.nominal_levels.empty(), "scenario needs at least one nominal level");
  for (std::size_t i = 0; i < sc.nominal_levels.size(); ++i) {
    const double l = sc.nominal_levels[i];
    require(l > 0.0 && l < 1.0, "nominal levels must lie in (0, 1)");
    require(i == 0 || l > sc.nominal_levels[i - 1], "nominal levels must be strictly increasing");
  }
  require(sc.tau > 0.0 && std::isfinite(sc.tau), "tau must be positive");
  require(sc.cv_folds >= 2 && sc.cv_repeats >= 1, "cross-validation needs >= 2 folds and >= 1 repeat");
  require(std::isfinite(sc.level), "level must be finite");
  if (sc.rule == BandwidthRule::fixed)
    require(sc.fixed_h > 0.0 && std::isfinite(sc.fixed_h), "fixed bandwidth must be positive");
  if (!is_density(sc.kind) && uses_rot(sc.rule))
    fail(ErrorCode::invalid_argument, "regression scenarios select bandwidths by cross-validation or a fixed h");
  require(sc.grid_size == 0 || sc.grid_size >= 2, "grid size must be at least 2");
}

CoverageReport run_coverage_study(const Scenario& sc) {
  return run_coverage_variants(sc, {Variant{sc.estimator, sc.rule}}).front();
}

std::vector<CoverageReport> run_coverage_variants(const Scenario& sc,
                                                  const std::vector<Variant>& variants) {
  require(!variants.empty(), "at least one variant is required");
  for (const Variant& v : variants) {
    Scenario probe = sc;
    probe.rule = v.rule;
    probe.estimator = v.estimator;
    validate(probe);
  }
  TrialContext ctx{sc, variants, scenario_kernel(sc), scenario_level(sc), scenario_grid_size(sc), {}, {}, {}};
  validate(ctx.kernel);
  ctx.fixed_grid = scenario_grid(sc.kind, ctx.grid_size);
  if (is_density(sc.kind)) {
    if (sc.kind == ScenarioKind::density_1d) {
      ctx.fixed_truth.resize(ctx.fixed_grid->size());
      for (std::size_t g = 0; g < ctx.fixed_grid->size(); ++g)
        ctx.fixed_truth[g] = true_density_1d(ctx.fixed_grid->point(g)[0]);
    } else {
      ctx.truth_set = true_level_set_2d(ctx.level, *ctx.fixed_grid, 4);
      if (ctx.truth_set->empty()) fail(ErrorCode::empty_set, "the true level set is empty");
    }
  } else if (sc.kind == ScenarioKind::invreg_exp) {
    // Root of 1 - exp(-x) = r0; must lie inside the evaluation interval.
    require(ctx.level > true_regression_invreg(kRegressionLo) && ctx.level < true_regression_invreg(kRegressionHi),
            "r0 must lie in (1 - exp(-0.1), 1 - exp(-0.9))");
    ctx.truth_set = PointSet(1, {ctx.level == 0.5 ? kInvregRoot : -std::log1p(-ctx.level)});
  }

  std::vector<std::vector<VariantOutcome>> trials(sc.trials);
  parallel_for(sc.trials, sc.threads, [&](std::size_t m) { trials[m] = run_trial(ctx, m); });

  std::vector<CoverageReport> reports(variants.size());
  for (std::size_t v = 0; v < variants.size(); ++v) {
    CoverageReport& rep = reports[v];
    rep.scenario = sc;
    rep.scenario.rule = variants[v].rule;
    rep.scenario.estimator = variants[v].estimator;
    rep.rows = aggregate(sc.nominal_levels, trials, v, false);
    if (sc.kind == ScenarioKind::invreg_exp) rep.normal_rows = aggregate(sc.nominal_levels, trials, v, true);
    double h_sum = 0.0;
    std::size_t h_count = 0;
    for (const auto& t : trials) {
      const VariantOutcome& o = t[v];
      rep.bandwidths.push_back(o.failed ? kNaN : o.h);
      if (o.failed) {
        ++rep.failed_trials;
        continue;
      }
      rep.dropped_replicates += o.dropped;
      rep.total_replicates += o.total;
      h_sum += o.h;
      ++h_count;
    }
    rep.mean_h = h_count ? h_sum / static_cast<double>(h_count) : kNaN;
    if (static_cast<double>(rep.failed_trials) > kTrialFailureBudget * static_cast<double>(sc.trials))
      fail(ErrorCode::budget_exceeded, std::to_string(rep.failed_trials) + " of " +
                                           std::to_string(sc.trials) + " trials failed");
  }
  return reports;
}

Sample gen_density_1d(std::size_t n, Rng& rng, std::vector<int>* labels) {
  require(n >= 1, "generator needs n >= 1");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> x(n);
  if (labels) labels->assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const bool first = u(rng) < 0.6;
    x[i] = z(rng) + (first ? 0.0 : 4.0);
    if (labels) (*labels)[i] = first ? 0 : 1;
  }
  return Sample::from_column(std::move(x));
}

double true_density_1d(double x) { return 0.6 * phi(x) + 0.4 * phi(x - 4.0); }

Sample gen_levelset_2d(std::size_t n, Rng& rng) {
  require(n >= 1, "generator needs n >= 1");
  static constexpr double cx[3] = {0.0, 1.0, 1.5};
  static constexpr double cy[3] = {0.0, 0.0, 0.5};
  std::uniform_int_distribution<int> pick(0, 2);
  std::normal_distribution<double> z(0.0, 0.3);
  std::vector<double> coords(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const int c = pick(rng);
    coords[2 * i] = cx[c] + z(rng);
    coords[2 * i + 1] = cy[c] + z(rng);
  }
  return Sample(std::move(coords), 2);
}

double true_density_2d(double x, double y) {
  static constexpr double cx[3] = {0.0, 1.0, 1.5};
  static constexpr double cy[3] = {0.0, 0.0, 0.5};
  constexpr double var = 0.09;
  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    const double dx = x - cx[c], dy = y - cy[c];
    total += std::exp(-0.5 * (dx * dx + dy * dy) / var);
  }
  return total / (3.0 * 2.0 * std::numbers::pi * var);
}

PairedSample gen_regression_sine(std::size_t n, Rng& rng) {
  require(n >= 1, "generator needs n >= 1");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> e(0.0, 0.1);
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = u(rng);
    y[i] = true_regression_sine(x[i]) + e(rng);
  }
  return PairedSample(std::move(x), std::move(y));
}

double true_regression_sine(double x) { return std::sin(std::numbers::pi * x); }

PairedSample gen_invreg_exp(std::size_t n, Rng& rng) {
  require(n >= 1, "generator needs n >= 1");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> e(0.0, 0.2);
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = u(rng);
    y[i] = true_regression_invreg(x[i]) + e(rng);
  }
  return PairedSample(std::move(x), std::move(y));
}

double true_regression_invreg(double x) { return -std::expm1(-x); }

EvalGrid scenario_grid(ScenarioKind kind, std::size_t grid_size) {
  switch (kind) {
    case ScenarioKind::density_1d:
      return EvalGrid::uniform(kDensityLo, kDensityHi, grid_size);
    case ScenarioKind::levelset_2d:
      return EvalGrid::uniform2d({kBoxLo[0], kBoxLo[1]}, {kBoxHi[0], kBoxHi[1]}, grid_size, grid_size);
    case ScenarioKind::regression_sine:
    case ScenarioKind::invreg_exp:
      return EvalGrid::uniform(kRegressionLo, kRegressionHi, grid_size);
  }
  fail(ErrorCode::invalid_argument, "unknown scenario");
}

PointSet true_level_set_2d(double level, const EvalGrid& grid, std::size_t refine) {
  require(grid.dim() == 2, "level sets of the 2-d mixture need a 2-d grid");
  require(refine >= 1, "refinement factor must be positive");
  const auto& ax = grid.axis(0);
  const auto& ay = grid.axis(1);
  const EvalGrid fine = EvalGrid::uniform2d({ax.front(), ay.front()}, {ax.back(), ay.back()},
                                            (ax.size() - 1) * refine + 1, (ay.size() - 1) * refine + 1);
  std::vector<double> values(fine.size());
  for (std::size_t g = 0; g < fine.size(); ++g) {
    const auto p = fine.point(g);
    values[g] = true_density_2d(p[0], p[1]);
  }
  return extract_level_set_2d(values, fine, level);
}

bool check_band_covers(const ConfidenceBand& band, std::span<const double> truth) {
  if (truth.size() != band.center.size()) fail(ErrorCode::dimension_mismatch, "truth length must match the band");
  for (std::size_t g = 0; g < truth.size(); ++g) {
    if (std::isnan(band.center[g])) continue;
    if (!(band.lower[g] <= truth[g] && truth[g] <= band.upper[g])) return false;
  }
  return true;
}

bool check_set_covers(const RegionSet& region, const PointSet& true_set) {
  return dilation_covers(region.center, region.radius, true_set);
}

}  // namespace debias
