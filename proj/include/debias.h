/*
 * C interface to the debiased inference library.
 *
 * Every fallible call returns a dbs_status; on failure dbs_last_error()
 * describes the most recent error on the calling thread. Handles are
 * opaque, owned by the caller, and released with the matching *_free.
 * Output arrays are caller-allocated; sizes come from the accessors.
 */
#ifndef DEBIAS_H
#define DEBIAS_H

#include <stddef.h>
#include <stdint.h>

#if defined(DEBIAS_BUILDING_LIBRARY)
#define DBS_API __attribute__((visibility("default")))
#else
#define DBS_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dbs_status {
  DBS_OK = 0,
  DBS_INVALID_ARGUMENT = 1,
  DBS_DIMENSION_MISMATCH = 2,
  DBS_DEGENERATE = 3,
  DBS_EMPTY_SET = 4,
  DBS_NUMERICAL = 5,
  DBS_BUDGET_EXCEEDED = 6,
  DBS_INTERNAL = 99
} dbs_status;

typedef enum dbs_kernel { DBS_KERNEL_GAUSSIAN = 0, DBS_KERNEL_BIWEIGHT = 1 } dbs_kernel;
typedef enum dbs_estimator { DBS_ESTIMATOR_DEBIASED = 0, DBS_ESTIMATOR_PLAIN = 1 } dbs_estimator;
typedef enum dbs_metric {
  DBS_METRIC_SUP = 0,
  DBS_METRIC_WEIGHTED_SUP = 1,
  DBS_METRIC_HAUSDORFF = 2
} dbs_metric;

typedef enum dbs_scenario_kind {
  DBS_SCENARIO_DENSITY_1D = 0,
  DBS_SCENARIO_LEVELSET_2D = 1,
  DBS_SCENARIO_REGRESSION_SINE = 2,
  DBS_SCENARIO_INVREG_EXP = 3
} dbs_scenario_kind;

typedef enum dbs_bandwidth_rule {
  DBS_RULE_ROT = 0,
  DBS_RULE_ROT_X2 = 1,
  DBS_RULE_ROT_HALF = 2,
  DBS_RULE_CV = 3,
  DBS_RULE_CV_X2 = 4,
  DBS_RULE_CV_HALF = 5,
  DBS_RULE_FIXED = 6
} dbs_bandwidth_rule;

typedef struct dbs_sample dbs_sample;
typedef struct dbs_paired dbs_paired;
typedef struct dbs_grid dbs_grid;
typedef struct dbs_band dbs_band;
typedef struct dbs_region dbs_region;
typedef struct dbs_report dbs_report;

DBS_API const char* dbs_last_error(void);
DBS_API const char* dbs_version(void);

/* Samples. coords is row-major n x dim, dim in {1, 2}. */
DBS_API dbs_status dbs_sample_create(const double* coords, size_t n, int dim, dbs_sample** out);
DBS_API void dbs_sample_free(dbs_sample* s);
DBS_API size_t dbs_sample_size(const dbs_sample* s);
DBS_API int dbs_sample_dim(const dbs_sample* s);

DBS_API dbs_status dbs_paired_create(const double* x, const double* y, size_t n, dbs_paired** out);
DBS_API void dbs_paired_free(dbs_paired* p);
DBS_API size_t dbs_paired_size(const dbs_paired* p);

/* Evaluation grids. 2-d points are indexed ix * ny + iy. */
DBS_API dbs_status dbs_grid_uniform(double lo, double hi, size_t count, dbs_grid** out);
DBS_API dbs_status dbs_grid_uniform2d(const double lo[2], const double hi[2], size_t nx, size_t ny,
                                      dbs_grid** out);
DBS_API dbs_status dbs_grid_line(const double* x, size_t count, dbs_grid** out);
DBS_API dbs_status dbs_grid_default_density(const dbs_sample* s, double h, size_t per_axis,
                                            dbs_grid** out);
DBS_API dbs_status dbs_grid_default_regression(const dbs_paired* p, size_t points, dbs_grid** out);
DBS_API void dbs_grid_free(dbs_grid* g);
DBS_API size_t dbs_grid_size(const dbs_grid* g);
DBS_API int dbs_grid_dim(const dbs_grid* g);
DBS_API void dbs_grid_shape(const dbs_grid* g, size_t* nx, size_t* ny);
DBS_API dbs_status dbs_grid_point(const dbs_grid* g, size_t index, double out[2]);

/* Kernels. */
DBS_API dbs_status dbs_kernel_moment(dbs_kernel k, int p, double* out);
DBS_API dbs_status dbs_debiased_kernel_eval(dbs_kernel k, int dim, double tau, const double* x,
                                            double* out);

/* Point estimates; out receives dbs_grid_size(g) values. */
DBS_API dbs_status dbs_kde(const dbs_sample* s, double h, dbs_kernel k, const dbs_grid* g,
                           double* out);
DBS_API dbs_status dbs_debiased_kde(const dbs_sample* s, double h, double tau, dbs_kernel k,
                                    const dbs_grid* g, double* out);
DBS_API dbs_status dbs_local_linear(const dbs_paired* p, double h, dbs_kernel k, const dbs_grid* g,
                                    double* out);
DBS_API dbs_status dbs_debiased_local_linear(const dbs_paired* p, double h, double tau,
                                             dbs_kernel k, const dbs_grid* g, double* out);

/* Bandwidths. A NULL candidate list selects the default grid. */
DBS_API dbs_status dbs_bandwidth_rot(const dbs_sample* s, double* h);
DBS_API dbs_status dbs_bandwidth_lscv(const dbs_sample* s, const double* candidates, size_t count,
                                      dbs_kernel k, unsigned threads, double* h);
DBS_API dbs_status dbs_bandwidth_cv(const dbs_paired* p, int folds, int repeats,
                                    const double* candidates, size_t count, uint64_t seed,
                                    dbs_kernel k, unsigned threads, double* h);

typedef struct dbs_bootstrap_config {
  size_t replicates;
  double alpha;
  uint64_t seed;
  dbs_metric metric;
  unsigned threads; /* 0: all cores */
} dbs_bootstrap_config;

DBS_API void dbs_bootstrap_config_default(dbs_bootstrap_config* cfg);

/* Confidence bands. */
DBS_API dbs_status dbs_density_band(const dbs_sample* s, double h, double tau, dbs_kernel k,
                                    const dbs_grid* g, const dbs_bootstrap_config* cfg,
                                    dbs_estimator est, dbs_band** out);
DBS_API dbs_status dbs_regression_band(const dbs_paired* p, double h, double tau, dbs_kernel k,
                                       const dbs_grid* g, const dbs_bootstrap_config* cfg,
                                       dbs_estimator est, dbs_band** out);
/* Same replicate statistics, quantile re-read at alpha. */
DBS_API dbs_status dbs_band_at_level(const dbs_band* b, double alpha, dbs_band** out);
DBS_API void dbs_band_free(dbs_band* b);
DBS_API size_t dbs_band_size(const dbs_band* b);
DBS_API double dbs_band_t_hat(const dbs_band* b);
DBS_API int dbs_band_is_variable(const dbs_band* b);
DBS_API const dbs_grid* dbs_band_grid(const dbs_band* b);
/* Any of center, lower, upper may be NULL. */
DBS_API void dbs_band_arrays(const dbs_band* b, double* center, double* lower, double* upper);
/* sqrt of the plain estimate for variable bands; fails for fixed bands. */
DBS_API dbs_status dbs_band_scale(const dbs_band* b, double* out);
DBS_API size_t dbs_band_replicate_count(const dbs_band* b);
DBS_API void dbs_band_replicate_stats(const dbs_band* b, double* out);
DBS_API size_t dbs_band_dropped(const dbs_band* b);
DBS_API dbs_status dbs_band_inversion_mask(const dbs_band* b, double level, unsigned char* mask);

/* Confidence sets. */
DBS_API dbs_status dbs_levelset_set(const dbs_sample* s, double level, double h, double tau,
                                    dbs_kernel k, const dbs_grid* g,
                                    const dbs_bootstrap_config* cfg, dbs_estimator est,
                                    dbs_region** out);
DBS_API dbs_status dbs_invreg_set(const dbs_paired* p, double r0, double h, double tau,
                                  dbs_kernel k, const dbs_grid* g, const dbs_bootstrap_config* cfg,
                                  dbs_estimator est, dbs_region** out);
DBS_API void dbs_region_free(dbs_region* r);
DBS_API int dbs_region_dim(const dbs_region* r);
DBS_API size_t dbs_region_size(const dbs_region* r);
/* Row-major dbs_region_size x dim coordinates of the centre set. */
DBS_API void dbs_region_points(const dbs_region* r, double* out);
DBS_API double dbs_region_radius(const dbs_region* r);
DBS_API dbs_status dbs_region_radius_at_level(const dbs_region* r, double alpha, double* out);
DBS_API size_t dbs_region_replicate_count(const dbs_region* r);
DBS_API void dbs_region_replicate_stats(const dbs_region* r, double* out);
DBS_API size_t dbs_region_dropped(const dbs_region* r);
/* covers = 1 iff every query point lies within radius of the centre set. */
DBS_API dbs_status dbs_region_covers(const dbs_region* r, double radius, const double* points,
                                     size_t count, int* covers);
/* Inverse-regression extras; fail for level-set regions. */
DBS_API dbs_status dbs_region_center_root(const dbs_region* r, double* out);
DBS_API dbs_status dbs_region_non_singleton_fraction(const dbs_region* r, double* out);
DBS_API size_t dbs_region_root_count(const dbs_region* r);
DBS_API void dbs_region_roots(const dbs_region* r, double* out);

DBS_API dbs_status dbs_invreg_normal_ci(double center_root, const double* roots, size_t count,
                                        double alpha, double* lower, double* upper);

/* Geometry on row-major point arrays. */
DBS_API dbs_status dbs_hausdorff(const double* a, size_t na, const double* b, size_t nb, int dim,
                                 double* out);

/* Coverage studies. */
typedef struct dbs_scenario {
  dbs_scenario_kind kind;
  size_t n;
  dbs_bandwidth_rule rule;
  double fixed_h;
  double tau;
  size_t replicates;
  size_t trials;
  uint64_t seed;
  dbs_estimator estimator;
  dbs_kernel kernel;
  size_t grid_size; /* 0: scenario default */
  double level;     /* 0: scenario default */
  int cv_folds;
  int cv_repeats;
  unsigned threads; /* 0: all cores */
} dbs_scenario;

DBS_API void dbs_scenario_default(dbs_scenario_kind kind, dbs_scenario* out);
DBS_API dbs_status dbs_simulate(const dbs_scenario* sc, const double* nominal, size_t levels,
                                dbs_report** out);
DBS_API void dbs_report_free(dbs_report* r);
DBS_API size_t dbs_report_rows(const dbs_report* r);
/* normal != 0 reads the normal-approximation rows (inverse regression only). */
DBS_API dbs_status dbs_report_row(const dbs_report* r, size_t i, int normal, double* nominal,
                                  size_t* hits, size_t* evaluated, double* coverage, double* se);
DBS_API int dbs_report_has_normal_rows(const dbs_report* r);
DBS_API size_t dbs_report_failed_trials(const dbs_report* r);
DBS_API size_t dbs_report_dropped_replicates(const dbs_report* r);
DBS_API size_t dbs_report_total_replicates(const dbs_report* r);
DBS_API double dbs_report_mean_h(const dbs_report* r);
/* out receives one bandwidth per trial, NaN for failed trials. */
DBS_API void dbs_report_bandwidths(const dbs_report* r, double* out);

#ifdef __cplusplus
}
#endif

#endif
