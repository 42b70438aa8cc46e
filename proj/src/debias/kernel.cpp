#include "debias/kernel.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "debias/error.hpp"

namespace debias {
namespace {

constexpr double kInvSqrt2Pi = 0.39894228040143267794;
constexpr double kQuadTolerance = 1e-10;

double integrate_1d(const auto& f, double lo, double hi) {
  double err = 0.0;
  double value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      f, lo, hi, 15, 1e-14, &err);
  if (!std::isfinite(value) || err > kQuadTolerance)
    fail(ErrorCode::numerical, "kernel quadrature did not converge (error estimate " +
                                   std::to_string(err) + ")");
  return value;
}

}  // namespace

void validate(const KernelSpec& k) {
  if (k.dim != 1 && k.dim != 2)
    fail(ErrorCode::invalid_argument, "kernel dimension must be 1 or 2");
}

const char* to_string(KernelKind kind) noexcept {
  return kind == KernelKind::gaussian ? "gaussian" : "biweight";
}

double kernel_profile(KernelKind kind, double u) noexcept {
  switch (kind) {
    case KernelKind::gaussian:
      return kInvSqrt2Pi * std::exp(-0.5 * u * u);
    case KernelKind::biweight: {
      double a = std::abs(u);
      if (a >= 1.0) return 0.0;
      double s = 1.0 - u * u;
      return 0.9375 * s * s;
    }
  }
  return 0.0;
}

double kernel_profile_d2(KernelKind kind, double u) noexcept {
  switch (kind) {
    case KernelKind::gaussian:
      return (u * u - 1.0) * kInvSqrt2Pi * std::exp(-0.5 * u * u);
    case KernelKind::biweight:
      if (std::abs(u) >= 1.0) return 0.0;
      return 3.75 * (3.0 * u * u - 1.0);
  }
  return 0.0;
}

double kernel_quadrature_radius(KernelKind kind) noexcept {
  return kind == KernelKind::gaussian ? 10.0 : 1.0;
}

double kernel_eval(const KernelSpec& k, std::span<const double> x) {
  validate(k);
  if (x.size() != static_cast<std::size_t>(k.dim))
    fail(ErrorCode::dimension_mismatch, "point dimension does not match kernel");
  if (k.kind == KernelKind::gaussian) {
    double r2 = 0.0;
    for (double v : x) r2 += v * v;
    double norm = k.dim == 1 ? kInvSqrt2Pi : 0.5 * std::numbers::inv_pi;
    return norm * std::exp(-0.5 * r2);
  }
  double prod = 1.0;
  for (double v : x) prod *= kernel_profile(k.kind, v);
  return prod;
}

double kernel_laplacian(const KernelSpec& k, std::span<const double> x) {
  double base = kernel_eval(k, x);
  if (k.kind == KernelKind::gaussian) {
    double r2 = 0.0;
    for (double v : x) r2 += v * v;
    return (r2 - k.dim) * base;
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    double term = kernel_profile_d2(k.kind, x[j]);
    for (std::size_t m = 0; m < x.size(); ++m)
      if (m != j) term *= kernel_profile(k.kind, x[m]);
    sum += term;
  }
  return sum;
}

double kernel_moment(KernelKind kind, int p) {
  if (p < 0) fail(ErrorCode::invalid_argument, "moment order must be non-negative");
  if (p % 2 == 1) return 0.0;
  if (kind == KernelKind::gaussian) {
    // (p - 1)!!
    double v = 1.0;
    for (int q = p - 1; q > 1; q -= 2) v *= q;
    return v;
  }
  double r = kernel_quadrature_radius(kind);
  return integrate_1d(
      [kind, p](double u) { return std::pow(u, p) * kernel_profile(kind, u); }, -r, r);
}

double kernel_ck(const KernelSpec& k) {
  validate(k);
  if (k.kind == KernelKind::gaussian) return 1.0;
  // c_K only involves the marginal of x_1, which is K1 for a product kernel.
  return kernel_moment(k.kind, 2);
}

DebiasedKernel::DebiasedKernel(KernelSpec base, double tau)
    : base_(base), tau_(tau), ck_(0.0) {
  validate(base_);
  if (!(tau > 0.0) || !std::isfinite(tau))
    fail(ErrorCode::invalid_argument, "tau must be positive");
  ck_ = kernel_ck(base_);
}

double DebiasedKernel::operator()(std::span<const double> x) const {
  double scaled[2] = {0.0, 0.0};
  for (std::size_t j = 0; j < x.size() && j < 2; ++j) scaled[j] = tau_ * x[j];
  double factor = std::pow(tau_, base_.dim + 2);
  return kernel_eval(base_, x) -
         0.5 * ck_ * factor *
             kernel_laplacian(base_, std::span<const double>(scaled, x.size()));
}

MomentMatrix::MomentMatrix(int order, std::vector<double> entries)
    : order_(order), entries_(std::move(entries)) {
  if (entries_.size() != static_cast<std::size_t>((order + 1) * (order + 1)))
    fail(ErrorCode::invalid_argument, "moment matrix entry count mismatch");
}

MomentMatrix moment_matrix(const KernelSpec& k, int order) {
  validate(k);
  if (k.dim != 1) fail(ErrorCode::invalid_argument, "moment matrix needs a 1-d kernel");
  if (order != 1 && order != 3)
    fail(ErrorCode::invalid_argument, "moment matrix order must be 1 or 3");
  int m = order + 1;
  std::vector<double> moments(2 * order + 1);
  for (int p = 0; p <= 2 * order; ++p) moments[p] = kernel_moment(k.kind, p);
  std::vector<double> entries(m * m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) entries[i * m + j] = moments[i + j];
  return MomentMatrix(order, std::move(entries));
}

}  // namespace debias
