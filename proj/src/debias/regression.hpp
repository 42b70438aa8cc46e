#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "debias/density.hpp"
#include "debias/grid.hpp"
#include "debias/kernel.hpp"
#include "debias/sample.hpp"

namespace debias {

//! Values are NaN at grid points where the local design was degenerate.
struct RegressionEstimate {
  EvalGrid grid;
  std::vector<double> values;
  EstimateMeta meta;
  std::size_t degenerate = 0;
};

// Ridge weight added (times the mean diagonal) to the slope entries of a
// local gram matrix whose unregularised solve is ill-conditioned.
inline constexpr double kRidge = 1e-10;
// A fit fails when more than this fraction of grid points is degenerate.
inline constexpr double kDegenerateBudget = 0.05;

//! Intercept of a weighted degree-1 fit from moment sums in scaled
//! coordinates u = (X_i - x) / h: s_j = sum w_i u^j, t_j = sum w_i u^j Y_i.
std::optional<double> local_linear_intercept(double s0, double s1, double s2, double t0,
                                             double t1);

//! Coefficient of u^2 in a weighted cubic fit from s_0..s_6 and t_0..t_3.
std::optional<double> local_cubic_quadratic_coef(std::span<const double, 7> s,
                                                 std::span<const double, 4> t);

enum class RegressionParts : unsigned { linear = 1, second_derivative = 2, both = 3 };

//! Local linear and local cubic fits at every grid point for one sample,
//! re-evaluable under bootstrap multiplicity weights. Kernel weights are
//! tabulated once; each evaluation accumulates the weighted moment sums
//! over observations in sample order and solves a 2x2 / 4x4 system per
//! grid point.
class LocalPolyEvaluator {
 public:
  struct Values {
    std::vector<double> linear;             // r_h
    std::vector<double> second_derivative;  // r''_b, b = h / tau
    std::vector<double> debiased;           // r_h - 1/2 c_K h^2 r''_b
    std::size_t linear_failures = 0;
    std::size_t cubic_failures = 0;
  };

  LocalPolyEvaluator(const PairedSample& ps, const EvalGrid& g, KernelSpec k, double h,
                     double tau, RegressionParts parts = RegressionParts::both);

  void evaluate(std::span<const double> weights, Values& out) const;
  Values evaluate() const;
  //! `weights` holds `count` consecutive rows of n multiplicities.
  void evaluate_batch(std::span<const double> weights, std::size_t count,
                      std::vector<Values>& out) const;

  std::size_t sample_size() const noexcept { return x_.size(); }
  const EvalGrid& grid() const noexcept { return grid_; }
  double h() const noexcept { return h_; }
  double b() const noexcept { return b_; }

 private:
  bool want(RegressionParts p) const noexcept {
    return (static_cast<unsigned>(parts_) & static_cast<unsigned>(p)) != 0;
  }

  void solve(const double* cubic, const double* linear, Values& out) const;

  EvalGrid grid_;
  std::vector<double> x_, y_;
  double h_, b_, ck_;
  RegressionParts parts_;
  bool shared_;
  std::vector<double> wh_, wb_;  // n x G kernel weights at h and at b
};

RegressionEstimate local_linear_fit(const PairedSample& ps, double h, KernelSpec k,
                                    const EvalGrid& g);
RegressionEstimate local_poly3_second_deriv(const PairedSample& ps, double b, KernelSpec k,
                                            const EvalGrid& g);
RegressionEstimate debiased_local_linear(const PairedSample& ps, double h, double tau,
                                         KernelSpec k, const EvalGrid& g);

//! (1/(n h)) sum_i u_i^(j+l) K(u_i), u_i = (X_i - x) / h, j, l = 0..3,
//! stored row-major.
std::array<double, 16> scaled_gram(std::span<const double> covariates, double x, double h,
                                   KernelSpec k);
inline std::array<double, 16> scaled_gram(const PairedSample& ps, double x, double h,
                                          KernelSpec k) {
  return scaled_gram(ps.x(), x, h, k);
}

//! Covariate range, 512 points unless given.
EvalGrid default_regression_grid(const PairedSample& ps, std::size_t points = 0);

//! Throws ErrorCode::degenerate if failures exceed the per-call budget.
void check_degenerate_budget(std::size_t failures, std::size_t points, const char* what);

}  // namespace debias
