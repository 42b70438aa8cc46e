#pragma once

#include <span>
#include <vector>

namespace debias {

enum class KernelKind { gaussian, biweight };

//! A smoothing kernel on R^d, d in {1, 2}. Two-dimensional kernels are
//! product kernels K(x) = K1(x_1) K1(x_2); for the gaussian this coincides
//! with the radial standard normal density.
struct KernelSpec {
  KernelKind kind = KernelKind::gaussian;
  int dim = 1;

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

void validate(const KernelSpec& k);

const char* to_string(KernelKind kind) noexcept;

// One-dimensional profile K1 and its second derivative.
double kernel_profile(KernelKind kind, double u) noexcept;
double kernel_profile_d2(KernelKind kind, double u) noexcept;

//! Half-width of the interval used when integrating K1 numerically.
double kernel_quadrature_radius(KernelKind kind) noexcept;

double kernel_eval(const KernelSpec& k, std::span<const double> x);

//! Laplacian of K; for the gaussian, (|x|^2 - d) K(x).
double kernel_laplacian(const KernelSpec& k, std::span<const double> x);

//! c_K = integral of x_1^2 K(x).
double kernel_ck(const KernelSpec& k);

//! integral of u^p K1(u) du.
double kernel_moment(KernelKind kind, int p);

//! M_tau(x) = K(x) - 1/2 c_K tau^(d+2) Laplacian K(tau x), a fourth-order
//! kernel. c_K is computed once at construction.
class DebiasedKernel {
 public:
  DebiasedKernel(KernelSpec base, double tau);

  double operator()(std::span<const double> x) const;

  const KernelSpec& base() const noexcept { return base_; }
  double tau() const noexcept { return tau_; }
  double ck() const noexcept { return ck_; }

 private:
  KernelSpec base_;
  double tau_;
  double ck_;
};

//! Omega_k with entries integral of u^(i+j) K1(u) du, i, j = 0..k.
class MomentMatrix {
 public:
  MomentMatrix(int order, std::vector<double> entries);

  int order() const noexcept { return order_; }
  int size() const noexcept { return order_ + 1; }
  double operator()(int i, int j) const { return entries_[i * size() + j]; }
  const std::vector<double>& entries() const noexcept { return entries_; }

 private:
  int order_;
  std::vector<double> entries_;
};

MomentMatrix moment_matrix(const KernelSpec& k, int order);

}  // namespace debias
