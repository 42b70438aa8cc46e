#include "debias/density.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "debias/error.hpp"

namespace debias {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;

void check_inputs(const Sample& s, const KernelSpec& k, const EvalGrid& g, double h) {
  validate(k);
  if (!(h > 0.0) || !std::isfinite(h)) fail(ErrorCode::invalid_argument, "bandwidth must be positive");
  if (s.size() == 0) fail(ErrorCode::invalid_argument, "sample is empty");
  if (s.dim() != k.dim || g.dim() != k.dim)
    fail(ErrorCode::dimension_mismatch, "sample, kernel and grid dimensions must agree");
}

// table[i * axis.size() + a] = f((axis[a] - X_ik) / bw)
std::vector<double> tabulate(const Sample& s, int k, const std::vector<double>& axis, double bw,
                             auto&& f) {
  std::size_t n = s.size(), m = axis.size();
  std::vector<double> t(n * m);
  double inv = 1.0 / bw;
  for (std::size_t i = 0; i < n; ++i) {
    double xi = s.at(i, k);
    double* row = t.data() + i * m;
    for (std::size_t a = 0; a < m; ++a) row[a] = f((axis[a] - xi) * inv);
  }
  return t;
}

}  // namespace

DensityEvaluator::DensityEvaluator(const Sample& s, const EvalGrid& g, KernelSpec k, double h,
                                   double tau, DensityParts parts)
    : grid_(g), kernel_(k), n_(s.size()), h_(h), b_(h / tau), ck_(0.0), parts_(parts),
      shared_(tau == 1.0) {
  check_inputs(s, k, g, h);
  if (!(tau > 0.0) || !std::isfinite(tau)) fail(ErrorCode::invalid_argument, "tau must be positive");
  ck_ = kernel_ck(k);
  auto K = [kind = k.kind](double u) { return kernel_profile(kind, u); };
  auto D2 = [kind = k.kind](double u) { return kernel_profile_d2(kind, u); };

  if (k.dim == 1) {
    // Full n x G tables of K((x - X_i)/h) and K''((x - X_i)/b).
    if (want(DensityParts::plain)) kh_x_ = tabulate(s, 0, g.axis(0), h_, K);
    if (want(DensityParts::laplacian)) d2b_x_ = tabulate(s, 0, g.axis(0), b_, D2);
    return;
  }
  bool need_kh = want(DensityParts::plain) || (want(DensityParts::laplacian) && shared_);
  if (need_kh) {
    kh_x_ = tabulate(s, 0, g.axis(0), h_, K);
    kh_y_ = tabulate(s, 1, g.axis(1), h_, K);
  }
  if (want(DensityParts::laplacian)) {
    if (!shared_) {
      kb_x_ = tabulate(s, 0, g.axis(0), b_, K);
      kb_y_ = tabulate(s, 1, g.axis(1), b_, K);
    }
    d2b_x_ = tabulate(s, 0, g.axis(0), b_, D2);
    d2b_y_ = tabulate(s, 1, g.axis(1), b_, D2);
  }
}

void DensityEvaluator::finish(Values& out) const {
  const double d = kernel_.dim;
  const double n = static_cast<double>(n_);
  if (!out.plain.empty()) {
    const double scale = 1.0 / (n * std::pow(h_, d));
    for (double& v : out.plain) v *= scale;
  }
  if (!out.laplacian.empty()) {
    const double scale = 1.0 / (n * std::pow(b_, d + 2.0));
    for (double& v : out.laplacian) v *= scale;
  }
  out.debiased.clear();
  if (!out.plain.empty() && !out.laplacian.empty()) {
    const std::size_t G = out.plain.size();
    out.debiased.resize(G);
    const double corr = 0.5 * ck_ * h_ * h_;
    for (std::size_t g = 0; g < G; ++g) out.debiased[g] = out.plain[g] - corr * out.laplacian[g];
  }
}

void DensityEvaluator::evaluate_batch(std::span<const double> weights, std::size_t count,
                                      std::vector<Values>& out) const {
  if (weights.size() != count * n_)
    fail(ErrorCode::dimension_mismatch, "weight count must equal sample size times batch size");
  const bool plain = want(DensityParts::plain);
  const bool lap = want(DensityParts::laplacian);
  const auto n = static_cast<Eigen::Index>(n_);
  out.assign(count, Values{});

  if (kernel_.dim == 1) {
    // Values = W K with W the count x n multiplicity matrix.
    const auto G = static_cast<Eigen::Index>(grid_.size());
    ConstMap W(weights.data(), static_cast<Eigen::Index>(count), n);
    RowMatrix P, L;
    if (plain) P.noalias() = W * ConstMap(kh_x_.data(), n, G);
    if (lap) L.noalias() = W * ConstMap(d2b_x_.data(), n, G);
    for (std::size_t r = 0; r < count; ++r) {
      const auto row = static_cast<Eigen::Index>(r);
      if (plain) out[r].plain.assign(P.row(row).data(), P.row(row).data() + G);
      if (lap) out[r].laplacian.assign(L.row(row).data(), L.row(row).data() + G);
      finish(out[r]);
    }
    return;
  }

  // Product kernels: the nx x ny value matrix is Kx^T diag(w) Ky.
  const auto nx = static_cast<Eigen::Index>(grid_.nx());
  const auto ny = static_cast<Eigen::Index>(grid_.ny());
  const auto& kbx = b_table(kb_x_, kh_x_);
  const auto& kby = b_table(kb_y_, kh_y_);
  RowMatrix scaled, V;
  auto product = [&](const std::vector<double>& left, const std::vector<double>& right,
                     Eigen::Map<const Eigen::VectorXd> w, bool accumulate) {
    scaled = w.asDiagonal() * ConstMap(left.data(), n, nx);
    if (accumulate)
      V.noalias() += scaled.transpose() * ConstMap(right.data(), n, ny);
    else
      V.noalias() = scaled.transpose() * ConstMap(right.data(), n, ny);
  };
  for (std::size_t r = 0; r < count; ++r) {
    Eigen::Map<const Eigen::VectorXd> w(weights.data() + r * n_, n);
    if (plain) {
      product(kh_x_, kh_y_, w, false);
      out[r].plain.assign(V.data(), V.data() + V.size());
    }
    if (lap) {
      // Laplacian of a product kernel: K''(u1) K(u2) + K(u1) K''(u2).
      product(d2b_x_, kby, w, false);
      product(kbx, d2b_y_, w, true);
      out[r].laplacian.assign(V.data(), V.data() + V.size());
    }
    finish(out[r]);
  }
}

void DensityEvaluator::evaluate(std::span<const double> weights, Values& out) const {
  std::vector<Values> batch;
  evaluate_batch(weights, 1, batch);
  out = std::move(batch.front());
}

DensityEvaluator::Values DensityEvaluator::evaluate() const {
  std::vector<double> ones(n_, 1.0);
  Values v;
  evaluate(ones, v);
  return v;
}

DensityEstimate kde_eval(const Sample& s, double h, KernelSpec k, const EvalGrid& g) {
  DensityEvaluator ev(s, g, k, h, 1.0, DensityParts::plain);
  return {g, ev.evaluate().plain, EstimateMeta{h, std::nullopt, k, false, 0}};
}

DensityEstimate kde_laplacian_eval(const Sample& s, double b, KernelSpec k, const EvalGrid& g) {
  DensityEvaluator ev(s, g, k, b, 1.0, DensityParts::laplacian);
  return {g, ev.evaluate().laplacian, EstimateMeta{b, std::nullopt, k, false, 2}};
}

DensityEstimate debiased_kde_eval(const Sample& s, double h, double tau, KernelSpec k,
                                  const EvalGrid& g) {
  DensityEvaluator ev(s, g, k, h, tau, DensityParts::both);
  return {g, ev.evaluate().debiased, EstimateMeta{h, tau, k, true, 0}};
}

EvalGrid default_density_grid(const Sample& s, double h, std::size_t per_axis) {
  if (!(h > 0.0)) fail(ErrorCode::invalid_argument, "bandwidth must be positive");
  if (s.size() == 0) fail(ErrorCode::invalid_argument, "sample is empty");
  if (per_axis == 0) per_axis = s.dim() == 1 ? 512 : 128;
  std::array<double, 2> lo{}, hi{};
  for (int k = 0; k < s.dim(); ++k) {
    auto col = s.column(k);
    auto [mn, mx] = std::minmax_element(col.begin(), col.end());
    lo[k] = *mn - 3.0 * h;
    hi[k] = *mx + 3.0 * h;
  }
  if (s.dim() == 1) return EvalGrid::uniform(lo[0], hi[0], per_axis);
  return EvalGrid::uniform2d(lo, hi, per_axis, per_axis);
}

}  // namespace debias
