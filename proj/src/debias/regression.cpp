#include "debias/regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "debias/error.hpp"

namespace debias {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kMinMass = 1e-12;
constexpr double kMinRcond = 1e-8;

void check_fit_inputs(KernelSpec k, const EvalGrid& g, double h) {
  validate(k);
  if (k.dim != 1) fail(ErrorCode::dimension_mismatch, "regression needs a 1-d kernel");
  if (g.dim() != 1) fail(ErrorCode::dimension_mismatch, "regression needs a 1-d grid");
  if (!(h > 0.0) || !std::isfinite(h)) fail(ErrorCode::invalid_argument, "bandwidth must be positive");
}

std::vector<double> weight_table(const std::vector<double>& x, const std::vector<double>& grid,
                                 KernelKind kind, double bw) {
  const std::size_t n = x.size(), G = grid.size();
  std::vector<double> t(n * G);
  const double inv = 1.0 / bw;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t g = 0; g < G; ++g) t[i * G + g] = kernel_profile(kind, (x[i] - grid[g]) * inv);
  return t;
}

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Observations per block of the moment table; fixed so that summation order
// never depends on the batch size or thread count.
constexpr std::size_t kObservationBlock = 256;

// Rows [i0, i0 + rows) of the moment table of degree Deg: column q * G + g
// holds K_ig u^q (q = 0..2Deg) and column (2Deg + 1 + q) * G + g holds
// K_ig u^q y_i (q = 0..Deg), with u = (X_i - x_g) / bw.
template <int Deg>
  requires(Deg == 1 || Deg == 3)
void moment_block(const std::vector<double>& x, const std::vector<double>& y,
                  const std::vector<double>& grid, const std::vector<double>& table, double bw,
                  std::size_t i0, std::size_t rows, RowMatrix& out) {
  constexpr int NS = 2 * Deg + 1;
  constexpr int NT = Deg + 1;
  const std::size_t G = grid.size();
  out.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>((NS + NT) * G));
  const double inv = 1.0 / bw;
  const double* xg = grid.data();
  for (std::size_t k = 0; k < rows; ++k) {
    const std::size_t i = i0 + k;
    const double xi = x[i], yi = y[i];
    const double* kw = table.data() + i * G;
    double* dst = out.row(static_cast<Eigen::Index>(k)).data();
    double* S[NS];
    double* T[NT];
    for (int q = 0; q < NS; ++q) S[q] = dst + q * G;
    for (int q = 0; q < NT; ++q) T[q] = dst + (NS + q) * G;
    for (std::size_t g = 0; g < G; ++g) {
      const double u = (xi - xg[g]) * inv;
      const double p0 = kw[g];
      const double p1 = p0 * u;
      const double p2 = p1 * u;
      S[0][g] = p0;
      S[1][g] = p1;
      S[2][g] = p2;
      T[0][g] = p0 * yi;
      T[1][g] = p1 * yi;
      if constexpr (Deg == 3) {
        const double p3 = p2 * u;
        const double p4 = p3 * u;
        S[3][g] = p3;
        S[4][g] = p4;
        S[5][g] = p4 * u;
        S[6][g] = p4 * u * u;
        T[2][g] = p2 * yi;
        T[3][g] = p3 * yi;
      }
    }
  }
}

// acc row r = sum_i W(r, i) * moment row i, for every replicate r.
template <int Deg>
void accumulate_batch(const std::vector<double>& x, const std::vector<double>& y,
                      const std::vector<double>& grid, const std::vector<double>& table,
                      double bw, std::span<const double> weights, std::size_t count,
                      RowMatrix& acc) {
  const std::size_t n = x.size();
  const auto cols = static_cast<Eigen::Index>((3 * Deg + 2) * grid.size());
  acc.setZero(static_cast<Eigen::Index>(count), cols);
  Eigen::Map<const RowMatrix> W(weights.data(), static_cast<Eigen::Index>(count),
                                static_cast<Eigen::Index>(n));
  RowMatrix block;
  for (std::size_t i0 = 0; i0 < n; i0 += kObservationBlock) {
    const std::size_t rows = std::min(kObservationBlock, n - i0);
    moment_block<Deg>(x, y, grid, table, bw, i0, rows, block);
    acc.noalias() += W.middleCols(static_cast<Eigen::Index>(i0), static_cast<Eigen::Index>(rows)) * block;
  }
}

}  // namespace

std::optional<double> local_linear_intercept(double s0, double s1, double s2, double t0,
                                             double t1) {
  if (!(s0 >= kMinMass)) return std::nullopt;
  // The ridge only enters for near-singular windows, so well-posed fits
  // reproduce lines exactly. It touches the slope entry only.
  for (const double lambda : {0.0, kRidge}) {
    const double s2r = s2 + lambda * 0.5 * (s0 + s2);
    const double det = s0 * s2r - s1 * s1;
    if (det > 1e-8 * s0 * s2r) return (s2r * t0 - s1 * t1) / det;
  }
  return std::nullopt;
}

std::optional<double> local_cubic_quadratic_coef(std::span<const double, 7> s,
                                                 std::span<const double, 4> t) {
  if (!(s[0] >= kMinMass)) return std::nullopt;
  Eigen::Matrix4d G;
  Eigen::Vector4d rhs;
  for (int j = 0; j < 4; ++j) {
    rhs(j) = t[j];
    for (int l = 0; l < 4; ++l) G(j, l) = s[j + l];
  }
  const double ridge = kRidge * G.trace() / 4.0;
  for (int attempt = 0; attempt < 2; ++attempt) {
    if (attempt == 1)
      for (int j = 1; j < 4; ++j) G(j, j) += ridge;
    Eigen::LLT<Eigen::Matrix4d> llt(G);
    if (llt.info() != Eigen::Success || !(llt.rcond() >= kMinRcond)) continue;
    const Eigen::Vector4d coef = llt.solve(rhs);
    if (std::isfinite(coef(2))) return coef(2);
  }
  return std::nullopt;
}

LocalPolyEvaluator::LocalPolyEvaluator(const PairedSample& ps, const EvalGrid& g, KernelSpec k,
                                       double h, double tau, RegressionParts parts)
    : grid_(g), x_(ps.x()), y_(ps.y()), h_(h), b_(h / tau), ck_(0.0), parts_(parts),
      shared_(tau == 1.0) {
  check_fit_inputs(k, g, h);
  if (!(tau > 0.0) || !std::isfinite(tau)) fail(ErrorCode::invalid_argument, "tau must be positive");
  ck_ = kernel_ck(k);
  if (want(RegressionParts::linear) || shared_) wh_ = weight_table(x_, g.axis(0), k.kind, h_);
  if (want(RegressionParts::second_derivative) && !shared_)
    wb_ = weight_table(x_, g.axis(0), k.kind, b_);
}

void LocalPolyEvaluator::solve(const double* cubic, const double* linear, Values& out) const {
  const std::size_t G = grid_.size();
  const bool lin = want(RegressionParts::linear);
  const bool cub = want(RegressionParts::second_derivative);
  out.linear.assign(lin ? G : 0, kNaN);
  out.second_derivative.assign(cub ? G : 0, kNaN);
  out.linear_failures = out.cubic_failures = 0;

  if (cub) {
    const double scale = 2.0 / (b_ * b_);
    for (std::size_t g = 0; g < G; ++g) {
      double s[7], t[4];
      for (int q = 0; q < 7; ++q) s[q] = cubic[q * G + g];
      for (int q = 0; q < 4; ++q) t[q] = cubic[(7 + q) * G + g];
      // Cubic coefficient beta_2 = r''/2, so r'' = 2 beta_2.
      if (auto c = local_cubic_quadratic_coef(std::span<const double, 7>(s),
                                              std::span<const double, 4>(t)))
        out.second_derivative[g] = scale * *c;
      else
        ++out.cubic_failures;
    }
  }
  if (lin) {
    // With a shared bandwidth the cubic moments contain the linear ones.
    const bool reuse = cub && shared_;
    const double* m = reuse ? cubic : linear;
    const std::size_t t0 = reuse ? 7 : 3;
    for (std::size_t g = 0; g < G; ++g) {
      if (auto v = local_linear_intercept(m[g], m[G + g], m[2 * G + g], m[t0 * G + g],
                                          m[(t0 + 1) * G + g]))
        out.linear[g] = *v;
      else
        ++out.linear_failures;
    }
  }
  out.debiased.clear();
  if (lin && cub) {
    out.debiased.resize(G);
    const double corr = 0.5 * ck_ * h_ * h_;
    for (std::size_t g = 0; g < G; ++g)
      out.debiased[g] = out.linear[g] - corr * out.second_derivative[g];
  }
}

void LocalPolyEvaluator::evaluate_batch(std::span<const double> weights, std::size_t count,
                                        std::vector<Values>& out) const {
  if (weights.size() != count * x_.size())
    fail(ErrorCode::dimension_mismatch, "weight count must equal sample size times batch size");
  const bool lin = want(RegressionParts::linear);
  const bool cub = want(RegressionParts::second_derivative);
  RowMatrix acc_cubic, acc_linear;
  if (cub) accumulate_batch<3>(x_, y_, grid_.axis(0), shared_ ? wh_ : wb_, b_, weights, count, acc_cubic);
  if (lin && !(cub && shared_))
    accumulate_batch<1>(x_, y_, grid_.axis(0), wh_, h_, weights, count, acc_linear);
  out.assign(count, Values{});
  for (std::size_t r = 0; r < count; ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    solve(acc_cubic.size() ? acc_cubic.row(row).data() : nullptr,
          acc_linear.size() ? acc_linear.row(row).data() : nullptr, out[r]);
  }
}

void LocalPolyEvaluator::evaluate(std::span<const double> weights, Values& out) const {
  std::vector<Values> batch;
  evaluate_batch(weights, 1, batch);
  out = std::move(batch.front());
}

LocalPolyEvaluator::Values LocalPolyEvaluator::evaluate() const {
  std::vector<double> ones(x_.size(), 1.0);
  Values v;
  evaluate(ones, v);
  return v;
}

void check_degenerate_budget(std::size_t failures, std::size_t points, const char* what) {
  if (static_cast<double>(failures) > kDegenerateBudget * static_cast<double>(points))
    fail(ErrorCode::degenerate, std::string(what) + ": " + std::to_string(failures) + " of " +
                                    std::to_string(points) + " grid points have a degenerate local design");
}

RegressionEstimate local_linear_fit(const PairedSample& ps, double h, KernelSpec k,
                                    const EvalGrid& g) {
  LocalPolyEvaluator ev(ps, g, k, h, 1.0, RegressionParts::linear);
  auto v = ev.evaluate();
  check_degenerate_budget(v.linear_failures, g.size(), "local linear fit");
  return {g, std::move(v.linear), EstimateMeta{h, std::nullopt, k, false, 0}, v.linear_failures};
}

RegressionEstimate local_poly3_second_deriv(const PairedSample& ps, double b, KernelSpec k,
                                            const EvalGrid& g) {
  // With tau = 1 the cubic fit uses bandwidth b directly.
  LocalPolyEvaluator ev(ps, g, k, b, 1.0, RegressionParts::second_derivative);
  auto v = ev.evaluate();
  check_degenerate_budget(v.cubic_failures, g.size(), "local cubic fit");
  return {g, std::move(v.second_derivative), EstimateMeta{b, std::nullopt, k, false, 2},
          v.cubic_failures};
}

RegressionEstimate debiased_local_linear(const PairedSample& ps, double h, double tau,
                                         KernelSpec k, const EvalGrid& g) {
  LocalPolyEvaluator ev(ps, g, k, h, tau, RegressionParts::both);
  auto v = ev.evaluate();
  check_degenerate_budget(v.linear_failures, g.size(), "local linear fit");
  check_degenerate_budget(v.cubic_failures, g.size(), "local cubic fit");
  std::size_t bad = 0;
  for (double d : v.debiased) bad += std::isnan(d) ? 1 : 0;
  return {g, std::move(v.debiased), EstimateMeta{h, tau, k, true, 0}, bad};
}

std::array<double, 16> scaled_gram(std::span<const double> covariates, double x, double h,
                                   KernelSpec k) {
  validate(k);
  if (!(h > 0.0)) fail(ErrorCode::invalid_argument, "bandwidth must be positive");
  if (covariates.empty()) fail(ErrorCode::invalid_argument, "no covariates");
  double moments[7] = {0, 0, 0, 0, 0, 0, 0};
  for (double xi : covariates) {
    const double u = (xi - x) / h;
    double p = kernel_profile(k.kind, u);
    for (int q = 0; q < 7; ++q) {
      moments[q] += p;
      p *= u;
    }
  }
  const double norm = 1.0 / (static_cast<double>(covariates.size()) * h);
  std::array<double, 16> out{};
  for (int j = 0; j < 4; ++j)
    for (int l = 0; l < 4; ++l) out[j * 4 + l] = norm * moments[j + l];
  return out;
}

EvalGrid default_regression_grid(const PairedSample& ps, std::size_t points) {
  if (points == 0) points = 512;
  auto [mn, mx] = std::minmax_element(ps.x().begin(), ps.x().end());
  return EvalGrid::uniform(*mn, *mx, points);
}

}  // namespace debias
