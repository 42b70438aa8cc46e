#include "debias.h"

#include <cmath>
#include <exception>
#include <limits>
#include <new>
#include <optional>
#include <string>
#include <vector>

#include "debias/bandwidth.hpp"
#include "debias/bootstrap.hpp"
#include "debias/density.hpp"
#include "debias/error.hpp"
#include "debias/geometry.hpp"
#include "debias/kernel.hpp"
#include "debias/regression.hpp"
#include "debias/simulation.hpp"

struct dbs_sample {
  debias::Sample value;
};
struct dbs_paired {
  debias::PairedSample value;
};
struct dbs_grid {
  debias::EvalGrid value;
};
struct dbs_band {
  debias::ConfidenceBand value;
  dbs_grid grid;
};
struct dbs_region {
  debias::RegionSet value;
  std::optional<debias::InverseRegressionSet> invreg;  // region mirrors invreg->region
};
struct dbs_report {
  debias::CoverageReport value;
};

namespace {

thread_local std::string g_last_error;

dbs_status to_status(debias::ErrorCode c) {
  switch (c) {
    case debias::ErrorCode::invalid_argument: return DBS_INVALID_ARGUMENT;
    case debias::ErrorCode::dimension_mismatch: return DBS_DIMENSION_MISMATCH;
    case debias::ErrorCode::degenerate: return DBS_DEGENERATE;
    case debias::ErrorCode::empty_set: return DBS_EMPTY_SET;
    case debias::ErrorCode::numerical: return DBS_NUMERICAL;
    case debias::ErrorCode::budget_exceeded: return DBS_BUDGET_EXCEEDED;
  }
  return DBS_INTERNAL;
}

// Runs fn, translating exceptions into a status and the thread-local message.
template <class Fn>
dbs_status guarded(Fn&& fn) noexcept {
  try {
    fn();
    g_last_error.clear();
    return DBS_OK;
  } catch (const debias::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return DBS_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return DBS_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return DBS_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (!p) debias::fail(debias::ErrorCode::invalid_argument, std::string(what) + " must not be null");
}

debias::KernelSpec kernel(dbs_kernel k, int dim) {
  if (k != DBS_KERNEL_GAUSSIAN && k != DBS_KERNEL_BIWEIGHT)
    debias::fail(debias::ErrorCode::invalid_argument, "unknown kernel");
  return {k == DBS_KERNEL_GAUSSIAN ? debias::KernelKind::gaussian : debias::KernelKind::biweight, dim};
}

debias::Estimator estimator(dbs_estimator e) {
  if (e != DBS_ESTIMATOR_DEBIASED && e != DBS_ESTIMATOR_PLAIN)
    debias::fail(debias::ErrorCode::invalid_argument, "unknown estimator");
  return e == DBS_ESTIMATOR_DEBIASED ? debias::Estimator::debiased : debias::Estimator::plain;
}

debias::BootstrapConfig config(const dbs_bootstrap_config* c) {
  need(c, "bootstrap config");
  debias::BootstrapConfig cfg;
  cfg.replicates = c->replicates;
  cfg.alpha = c->alpha;
  cfg.seed = c->seed;
  switch (c->metric) {
    case DBS_METRIC_SUP: cfg.metric = debias::Metric::sup; break;
    case DBS_METRIC_WEIGHTED_SUP: cfg.metric = debias::Metric::weighted_sup; break;
    case DBS_METRIC_HAUSDORFF: cfg.metric = debias::Metric::hausdorff; break;
    default: debias::fail(debias::ErrorCode::invalid_argument, "unknown metric");
  }
  cfg.threads = c->threads;
  return cfg;
}

void copy_values(const std::vector<double>& v, double* out) {
  need(out, "output array");
  std::copy(v.begin(), v.end(), out);
}

std::vector<double> span_copy(const double* p, size_t n) {
  if (n > 0) need(p, "input array");
  return n ? std::vector<double>(p, p + n) : std::vector<double>{};
}

dbs_band* make_band(debias::ConfidenceBand b) {
  auto* out = new dbs_band{std::move(b), {}};
  out->grid.value = out->value.grid;
  return out;
}

}  // namespace

extern "C" {

const char* dbs_last_error(void) { return g_last_error.c_str(); }

const char* dbs_version(void) { return "1.0.0"; }

dbs_status dbs_sample_create(const double* coords, size_t n, int dim, dbs_sample** out) {
  return guarded([&] {
    need(out, "output handle");
    if (dim != 1 && dim != 2) debias::fail(debias::ErrorCode::invalid_argument, "dimension must be 1 or 2");
    *out = new dbs_sample{debias::Sample(span_copy(coords, n * static_cast<size_t>(dim)), dim)};
  });
}

void dbs_sample_free(dbs_sample* s) { delete s; }
size_t dbs_sample_size(const dbs_sample* s) { return s ? s->value.size() : 0; }
int dbs_sample_dim(const dbs_sample* s) { return s ? s->value.dim() : 0; }

dbs_status dbs_paired_create(const double* x, const double* y, size_t n, dbs_paired** out) {
  return guarded([&] {
    need(out, "output handle");
    *out = new dbs_paired{debias::PairedSample(span_copy(x, n), span_copy(y, n))};
  });
}

void dbs_paired_free(dbs_paired* p) { delete p; }
size_t dbs_paired_size(const dbs_paired* p) { return p ? p->value.size() : 0; }

dbs_status dbs_grid_uniform(double lo, double hi, size_t count, dbs_grid** out) {
  return guarded([&] {
    need(out, "output handle");
    *out = new dbs_grid{debias::EvalGrid::uniform(lo, hi, count)};
  });
}

dbs_status dbs_grid_uniform2d(const double lo[2], const double hi[2], size_t nx, size_t ny,
                              dbs_grid** out) {
  return guarded([&] {
    need(out, "output handle");
    need(lo, "lo");
    need(hi, "hi");
    *out = new dbs_grid{debias::EvalGrid::uniform2d({lo[0], lo[1]}, {hi[0], hi[1]}, nx, ny)};
  });
}

dbs_status dbs_grid_line(const double* x, size_t count, dbs_grid** out) {
  return guarded([&] {
    need(out, "output handle");
    *out = new dbs_grid{debias::EvalGrid::line(span_copy(x, count))};
  });
}

dbs_status dbs_grid_default_density(const dbs_sample* s, double h, size_t per_axis, dbs_grid** out) {
  return guarded([&] {
    need(s, "sample");
    need(out, "output handle");
    *out = new dbs_grid{debias::default_density_grid(s->value, h, per_axis)};
  });
}

dbs_status dbs_grid_default_regression(const dbs_paired* p, size_t points, dbs_grid** out) {
  return guarded([&] {
    need(p, "paired sample");
    need(out, "output handle");
    *out = new dbs_grid{debias::default_regression_grid(p->value, points)};
  });
}

void dbs_grid_free(dbs_grid* g) { delete g; }
size_t dbs_grid_size(const dbs_grid* g) { return g ? g->value.size() : 0; }
int dbs_grid_dim(const dbs_grid* g) { return g ? g->value.dim() : 0; }

void dbs_grid_shape(const dbs_grid* g, size_t* nx, size_t* ny) {
  if (nx) *nx = g ? g->value.nx() : 0;
  if (ny) *ny = g ? g->value.ny() : 0;
}

dbs_status dbs_grid_point(const dbs_grid* g, size_t index, double out[2]) {
  return guarded([&] {
    need(g, "grid");
    need(out, "output");
    if (index >= g->value.size()) debias::fail(debias::ErrorCode::invalid_argument, "grid index out of range");
    const auto p = g->value.point(index);
    out[0] = p[0];
    out[1] = g->value.dim() == 2 ? p[1] : 0.0;
  });
}

dbs_status dbs_kernel_moment(dbs_kernel k, int p, double* out) {
  return guarded([&] {
    need(out, "output");
    *out = debias::kernel_moment(kernel(k, 1).kind, p);
  });
}

dbs_status dbs_debiased_kernel_eval(dbs_kernel k, int dim, double tau, const double* x, double* out) {
  return guarded([&] {
    need(x, "point");
    need(out, "output");
    debias::DebiasedKernel m(kernel(k, dim), tau);
    *out = m(std::span<const double>(x, static_cast<size_t>(dim)));
  });
}

dbs_status dbs_kde(const dbs_sample* s, double h, dbs_kernel k, const dbs_grid* g, double* out) {
  return guarded([&] {
    need(s, "sample");
    need(g, "grid");
    copy_values(debias::kde_eval(s->value, h, kernel(k, s->value.dim()), g->value).values, out);
  });
}

dbs_status dbs_debiased_kde(const dbs_sample* s, double h, double tau, dbs_kernel k, const dbs_grid* g,
                            double* out) {
  return guarded([&] {
    need(s, "sample");
    need(g, "grid");
    copy_values(debias::debiased_kde_eval(s->value, h, tau, kernel(k, s->value.dim()), g->value).values,
                out);
  });
}

dbs_status dbs_local_linear(const dbs_paired* p, double h, dbs_kernel k, const dbs_grid* g, double* out) {
  return guarded([&] {
    need(p, "paired sample");
    need(g, "grid");
    copy_values(debias::local_linear_fit(p->value, h, kernel(k, 1), g->value).values, out);
  });
}

dbs_status dbs_debiased_local_linear(const dbs_paired* p, double h, double tau, dbs_kernel k,
                                     const dbs_grid* g, double* out) {
  return guarded([&] {
    need(p, "paired sample");
    need(g, "grid");
    copy_values(debias::debiased_local_linear(p->value, h, tau, kernel(k, 1), g->value).values, out);
  });
}

dbs_status dbs_bandwidth_rot(const dbs_sample* s, double* h) {
  return guarded([&] {
    need(s, "sample");
    need(h, "output");
    *h = debias::rule_of_thumb(s->value).h;
  });
}

dbs_status dbs_bandwidth_lscv(const dbs_sample* s, const double* candidates, size_t count, dbs_kernel k,
                              unsigned threads, double* h) {
  return guarded([&] {
    need(s, "sample");
    need(h, "output");
    auto c = candidates ? span_copy(candidates, count) : debias::default_lscv_candidates(s->value);
    *h = debias::lscv_bandwidth(s->value, c, kernel(k, s->value.dim()), threads).h;
  });
}

dbs_status dbs_bandwidth_cv(const dbs_paired* p, int folds, int repeats, const double* candidates,
                            size_t count, uint64_t seed, dbs_kernel k, unsigned threads, double* h) {
  return guarded([&] {
    need(p, "paired sample");
    need(h, "output");
    auto c = candidates ? span_copy(candidates, count) : debias::default_cv_candidates(p->value);
    *h = debias::kfold_cv_bandwidth(p->value, folds, repeats, c, seed, kernel(k, 1), threads).h;
  });
}

void dbs_bootstrap_config_default(dbs_bootstrap_config* cfg) {
  if (!cfg) return;
  cfg->replicates = 500;
  cfg->alpha = 0.05;
  cfg->seed = 42;
  cfg->metric = DBS_METRIC_SUP;
  cfg->threads = 1;
}

dbs_status dbs_density_band(const dbs_sample* s, double h, double tau, dbs_kernel k, const dbs_grid* g,
                            const dbs_bootstrap_config* cfg, dbs_estimator est, dbs_band** out) {
  return guarded([&] {
    need(s, "sample");
    need(g, "grid");
    need(out, "output handle");
    *out = make_band(debias::density_confidence_band(s->value, h, tau, kernel(k, s->value.dim()),
                                                     g->value, config(cfg), estimator(est)));
  });
}

dbs_status dbs_regression_band(const dbs_paired* p, double h, double tau, dbs_kernel k, const dbs_grid* g,
                               const dbs_bootstrap_config* cfg, dbs_estimator est, dbs_band** out) {
  return guarded([&] {
    need(p, "paired sample");
    need(g, "grid");
    need(out, "output handle");
    *out = make_band(debias::regression_confidence_band(p->value, h, tau, kernel(k, 1), g->value,
                                                        config(cfg), estimator(est)));
  });
}

dbs_status dbs_band_at_level(const dbs_band* b, double alpha, dbs_band** out) {
  return guarded([&] {
    need(b, "band");
    need(out, "output handle");
    *out = make_band(debias::band_at_level(b->value, alpha));
  });
}

void dbs_band_free(dbs_band* b) { delete b; }
size_t dbs_band_size(const dbs_band* b) { return b ? b->value.center.size() : 0; }
double dbs_band_t_hat(const dbs_band* b) { return b ? b->value.t_hat : std::numeric_limits<double>::quiet_NaN(); }
int dbs_band_is_variable(const dbs_band* b) { return b && b->value.kind == debias::BandKind::variable; }
const dbs_grid* dbs_band_grid(const dbs_band* b) { return b ? &b->grid : nullptr; }

void dbs_band_arrays(const dbs_band* b, double* center, double* lower, double* upper) {
  if (!b) return;
  if (center) std::copy(b->value.center.begin(), b->value.center.end(), center);
  if (lower) std::copy(b->value.lower.begin(), b->value.lower.end(), lower);
  if (upper) std::copy(b->value.upper.begin(), b->value.upper.end(), upper);
}

dbs_status dbs_band_scale(const dbs_band* b, double* out) {
  return guarded([&] {
    need(b, "band");
    if (b->value.kind != debias::BandKind::variable)
      debias::fail(debias::ErrorCode::invalid_argument, "fixed-width bands have no scale");
    copy_values(b->value.scale, out);
  });
}

size_t dbs_band_replicate_count(const dbs_band* b) { return b ? b->value.quantile.replicate_stats.size() : 0; }

void dbs_band_replicate_stats(const dbs_band* b, double* out) {
  if (b && out) std::copy(b->value.quantile.replicate_stats.begin(), b->value.quantile.replicate_stats.end(), out);
}

size_t dbs_band_dropped(const dbs_band* b) { return b ? b->value.quantile.dropped : 0; }

dbs_status dbs_band_inversion_mask(const dbs_band* b, double level, unsigned char* mask) {
  return guarded([&] {
    need(b, "band");
    need(mask, "mask");
    auto m = debias::levelset_inversion_set(b->value, level);
    std::copy(m.begin(), m.end(), mask);
  });
}

dbs_status dbs_levelset_set(const dbs_sample* s, double level, double h, double tau, dbs_kernel k,
                            const dbs_grid* g, const dbs_bootstrap_config* cfg, dbs_estimator est,
                            dbs_region** out) {
  return guarded([&] {
    need(s, "sample");
    need(g, "grid");
    need(out, "output handle");
    *out = new dbs_region{debias::levelset_confidence_set(s->value, level, h, tau, kernel(k, s->value.dim()),
                                                          g->value, config(cfg), estimator(est)),
                          std::nullopt};
  });
}

dbs_status dbs_invreg_set(const dbs_paired* p, double r0, double h, double tau, dbs_kernel k,
                          const dbs_grid* g, const dbs_bootstrap_config* cfg, dbs_estimator est,
                          dbs_region** out) {
  return guarded([&] {
    need(p, "paired sample");
    need(g, "grid");
    need(out, "output handle");
    auto set = debias::invreg_confidence_set(p->value, r0, h, tau, kernel(k, 1), g->value, config(cfg),
                                             estimator(est));
    auto region = set.region;
    *out = new dbs_region{std::move(region), std::move(set)};
  });
}

void dbs_region_free(dbs_region* r) { delete r; }
int dbs_region_dim(const dbs_region* r) { return r ? r->value.center.dim() : 0; }
size_t dbs_region_size(const dbs_region* r) { return r ? r->value.center.size() : 0; }

void dbs_region_points(const dbs_region* r, double* out) {
  if (r && out) std::copy(r->value.center.coords().begin(), r->value.center.coords().end(), out);
}

double dbs_region_radius(const dbs_region* r) { return r ? r->value.radius : std::numeric_limits<double>::quiet_NaN(); }

dbs_status dbs_region_radius_at_level(const dbs_region* r, double alpha, double* out) {
  return guarded([&] {
    need(r, "region");
    need(out, "output");
    *out = debias::requantile(r->value.quantile, alpha).t_hat;
  });
}

size_t dbs_region_replicate_count(const dbs_region* r) { return r ? r->value.quantile.replicate_stats.size() : 0; }

void dbs_region_replicate_stats(const dbs_region* r, double* out) {
  if (r && out) std::copy(r->value.quantile.replicate_stats.begin(), r->value.quantile.replicate_stats.end(), out);
}

size_t dbs_region_dropped(const dbs_region* r) { return r ? r->value.quantile.dropped : 0; }

dbs_status dbs_region_covers(const dbs_region* r, double radius, const double* points, size_t count,
                             int* covers) {
  return guarded([&] {
    need(r, "region");
    need(covers, "output");
    const int dim = r->value.center.dim();
    debias::PointSet query(dim, span_copy(points, count * static_cast<size_t>(dim)));
    *covers = debias::dilation_covers(r->value.center, radius, query) ? 1 : 0;
  });
}

dbs_status dbs_region_center_root(const dbs_region* r, double* out) {
  return guarded([&] {
    need(r, "region");
    need(out, "output");
    if (!r->invreg) debias::fail(debias::ErrorCode::invalid_argument, "not an inverse-regression region");
    *out = r->invreg->center_root;
  });
}

dbs_status dbs_region_non_singleton_fraction(const dbs_region* r, double* out) {
  return guarded([&] {
    need(r, "region");
    need(out, "output");
    if (!r->invreg) debias::fail(debias::ErrorCode::invalid_argument, "not an inverse-regression region");
    *out = r->invreg->non_singleton_fraction;
  });
}

size_t dbs_region_root_count(const dbs_region* r) {
  return r && r->invreg ? r->invreg->replicate_roots.size() : 0;
}

void dbs_region_roots(const dbs_region* r, double* out) {
  if (r && r->invreg && out) std::copy(r->invreg->replicate_roots.begin(), r->invreg->replicate_roots.end(), out);
}

dbs_status dbs_invreg_normal_ci(double center_root, const double* roots, size_t count, double alpha,
                                double* lower, double* upper) {
  return guarded([&] {
    need(lower, "lower");
    need(upper, "upper");
    auto v = span_copy(roots, count);
    const auto ci = debias::invreg_normal_ci(center_root, v, alpha);
    *lower = ci.lower;
    *upper = ci.upper;
  });
}

dbs_status dbs_hausdorff(const double* a, size_t na, const double* b, size_t nb, int dim, double* out) {
  return guarded([&] {
    need(out, "output");
    if (dim != 1 && dim != 2) debias::fail(debias::ErrorCode::invalid_argument, "dimension must be 1 or 2");
    const auto d = static_cast<size_t>(dim);
    *out = debias::hausdorff(debias::PointSet(dim, span_copy(a, na * d)),
                             debias::PointSet(dim, span_copy(b, nb * d)));
  });
}

void dbs_scenario_default(dbs_scenario_kind kind, dbs_scenario* out) {
  if (!out) return;
  const debias::Scenario sc;
  out->kind = kind;
  out->n = sc.n;
  out->rule = (kind == DBS_SCENARIO_REGRESSION_SINE || kind == DBS_SCENARIO_INVREG_EXP) ? DBS_RULE_CV : DBS_RULE_ROT;
  out->fixed_h = 0.0;
  out->tau = sc.tau;
  out->replicates = sc.replicates;
  out->trials = sc.trials;
  out->seed = sc.seed;
  out->estimator = DBS_ESTIMATOR_DEBIASED;
  out->kernel = DBS_KERNEL_GAUSSIAN;
  out->grid_size = 0;
  out->level = 0.0;
  out->cv_folds = sc.cv_folds;
  out->cv_repeats = sc.cv_repeats;
  out->threads = 1;
}

dbs_status dbs_simulate(const dbs_scenario* s, const double* nominal, size_t levels, dbs_report** out) {
  return guarded([&] {
    need(s, "scenario");
    need(out, "output handle");
    debias::Scenario sc;
    switch (s->kind) {
      case DBS_SCENARIO_DENSITY_1D: sc.kind = debias::ScenarioKind::density_1d; break;
      case DBS_SCENARIO_LEVELSET_2D: sc.kind = debias::ScenarioKind::levelset_2d; break;
      case DBS_SCENARIO_REGRESSION_SINE: sc.kind = debias::ScenarioKind::regression_sine; break;
      case DBS_SCENARIO_INVREG_EXP: sc.kind = debias::ScenarioKind::invreg_exp; break;
      default: debias::fail(debias::ErrorCode::invalid_argument, "unknown scenario");
    }
    if (s->rule < DBS_RULE_ROT || s->rule > DBS_RULE_FIXED)
      debias::fail(debias::ErrorCode::invalid_argument, "unknown bandwidth rule");
    sc.n = s->n;
    sc.rule = static_cast<debias::BandwidthRule>(s->rule);
    sc.fixed_h = s->fixed_h;
    sc.tau = s->tau;
    sc.replicates = s->replicates;
    sc.trials = s->trials;
    sc.nominal_levels = span_copy(nominal, levels);
    sc.seed = s->seed;
    sc.estimator = estimator(s->estimator);
    sc.kernel = kernel(s->kernel, 1);
    sc.grid_size = s->grid_size;
    sc.level = s->level;
    sc.cv_folds = s->cv_folds;
    sc.cv_repeats = s->cv_repeats;
    sc.threads = s->threads;
    *out = new dbs_report{debias::run_coverage_study(sc)};
  });
}

void dbs_report_free(dbs_report* r) { delete r; }
size_t dbs_report_rows(const dbs_report* r) { return r ? r->value.rows.size() : 0; }
int dbs_report_has_normal_rows(const dbs_report* r) { return r && !r->value.normal_rows.empty(); }

dbs_status dbs_report_row(const dbs_report* r, size_t i, int normal, double* nominal, size_t* hits,
                          size_t* evaluated, double* coverage, double* se) {
  return guarded([&] {
    need(r, "report");
    const auto& rows = normal ? r->value.normal_rows : r->value.rows;
    if (i >= rows.size()) debias::fail(debias::ErrorCode::invalid_argument, "row index out of range");
    const auto& row = rows[i];
    if (nominal) *nominal = row.nominal;
    if (hits) *hits = row.hits;
    if (evaluated) *evaluated = row.evaluated;
    if (coverage) *coverage = row.coverage;
    if (se) *se = row.se;
  });
}

size_t dbs_report_failed_trials(const dbs_report* r) { return r ? r->value.failed_trials : 0; }
size_t dbs_report_dropped_replicates(const dbs_report* r) { return r ? r->value.dropped_replicates : 0; }
size_t dbs_report_total_replicates(const dbs_report* r) { return r ? r->value.total_replicates : 0; }
double dbs_report_mean_h(const dbs_report* r) { return r ? r->value.mean_h : std::numeric_limits<double>::quiet_NaN(); }

void dbs_report_bandwidths(const dbs_report* r, double* out) {
  if (r && out) std::copy(r->value.bandwidths.begin(), r->value.bandwidths.end(), out);
}

}  // extern "C"
