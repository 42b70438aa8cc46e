#include "debias/bandwidth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "debias/density.hpp"
#include "debias/error.hpp"
#include "debias/parallel.hpp"
#include "debias/regression.hpp"
#include "debias/rng.hpp"

namespace debias {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kMaxCachedRows = 3000;

BandwidthChoice pick_minimum(std::vector<std::pair<double, double>> diag, BandwidthMethod m) {
  double best = kInf;
  for (auto& [h, score] : diag)
    if (std::isfinite(score)) best = std::min(best, score);
  if (!std::isfinite(best))
    fail(ErrorCode::numerical, "every bandwidth candidate has a non-finite score");
  double chosen = kInf;
  for (auto& [h, score] : diag)
    if (std::isfinite(score) && score <= best + kScoreTieTolerance) chosen = std::min(chosen, h);
  return {chosen, m, std::move(diag)};
}

void check_candidates(std::span<const double> c) {
  if (c.empty()) fail(ErrorCode::invalid_argument, "bandwidth candidate list is empty");
  for (double h : c)
    if (!(h > 0.0) || !std::isfinite(h))
      fail(ErrorCode::invalid_argument, "bandwidth candidates must be positive");
}

double trapezoid(const EvalGrid& g, const std::vector<double>& f) {
  auto weights = [](const std::vector<double>& a) {
    std::vector<double> w(a.size(), 0.0);
    for (std::size_t i = 0; i + 1 < a.size(); ++i) {
      double half = 0.5 * (a[i + 1] - a[i]);
      w[i] += half;
      w[i + 1] += half;
    }
    return w;
  };
  auto wx = weights(g.axis(0));
  if (g.dim() == 1) {
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s += wx[i] * f[i];
    return s;
  }
  auto wy = weights(g.axis(1));
  double s = 0.0;
  for (std::size_t a = 0; a < wx.size(); ++a)
    for (std::size_t b = 0; b < wy.size(); ++b) s += wx[a] * wy[b] * f[a * wy.size() + b];
  return s;
}

double lscv_score(const Sample& s, double h, KernelSpec k) {
  auto grid = default_density_grid(s, h);
  auto est = kde_eval(s, h, k, grid);
  std::vector<double> sq(est.values.size());
  for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = est.values[i] * est.values[i];
  const double integral = trapezoid(grid, sq);

  const std::size_t n = s.size();
  const int d = s.dim();
  double loo = 0.0;
  double u[2];
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      for (int q = 0; q < d; ++q) u[q] = (s.at(i, q) - s.at(j, q)) / h;
      acc += kernel_eval(k, std::span<const double>(u, d));
    }
    loo += acc / (static_cast<double>(n - 1) * std::pow(h, d));
  }
  return integral - 2.0 * loo / static_cast<double>(n);
}

}  // namespace

const char* to_string(BandwidthMethod m) noexcept {
  switch (m) {
    case BandwidthMethod::rot: return "rot";
    case BandwidthMethod::lscv: return "lscv";
    case BandwidthMethod::kfold_cv: return "kfold_cv";
    case BandwidthMethod::fixed: return "fixed";
  }
  return "fixed";
}

double sample_sd(std::span<const double> v) {
  if (v.size() < 2) fail(ErrorCode::invalid_argument, "standard deviation needs at least 2 values");
  double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double sample_quantile(std::vector<double> v, double p) {
  if (v.empty()) fail(ErrorCode::invalid_argument, "quantile of an empty set");
  std::sort(v.begin(), v.end());
  double pos = p * static_cast<double>(v.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  auto hi = std::min(lo + 1, v.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

double dispersion_scale(const Sample& s) {
  if (s.size() < 2) fail(ErrorCode::invalid_argument, "rule of thumb needs at least 2 points");
  if (s.dim() == 1) {
    auto x = s.column(0);
    double sd = sample_sd(x);
    double iqr = sample_quantile(x, 0.75) - sample_quantile(x, 0.25);
    double lo = std::min(sd, iqr / 1.34);
    if (!(lo > 0.0)) lo = sd;
    if (!(lo > 0.0)) fail(ErrorCode::degenerate, "sample has zero dispersion");
    return lo;
  }
  double prod = 1.0;
  for (int k = 0; k < s.dim(); ++k) {
    double sd = sample_sd(s.column(k));
    if (!(sd > 0.0)) fail(ErrorCode::degenerate, "sample has zero dispersion along an axis");
    prod *= sd;
  }
  return std::pow(prod, 1.0 / s.dim());
}

BandwidthChoice rule_of_thumb(const Sample& s) {
  const double n = static_cast<double>(s.size());
  const double scale = dispersion_scale(s);
  double h;
  if (s.dim() == 1) {
    h = 0.9 * scale * std::pow(n, -0.2);
  } else {
    const double d = s.dim();
    h = scale * std::pow(4.0 / ((d + 2.0) * n), 1.0 / (d + 4.0));
  }
  return {h, BandwidthMethod::rot, {}};
}

BandwidthChoice lscv_bandwidth(const Sample& s, std::span<const double> candidates, KernelSpec k,
                               unsigned threads) {
  check_candidates(candidates);
  k.dim = s.dim();
  if (s.size() < 2) fail(ErrorCode::invalid_argument, "LSCV needs at least 2 points");
  std::vector<std::pair<double, double>> diag(candidates.size());
  parallel_for(candidates.size(), threads, [&](std::size_t c) {
    double score = lscv_score(s, candidates[c], k);
    diag[c] = {candidates[c], std::isfinite(score) ? score : kInf};
  });
  return pick_minimum(std::move(diag), BandwidthMethod::lscv);
}

BandwidthChoice kfold_cv_bandwidth(const PairedSample& ps, int folds, int repeats,
                                   std::span<const double> candidates, std::uint64_t seed,
                                   KernelSpec k, unsigned threads) {
  check_candidates(candidates);
  validate(k);
  if (folds < 2) fail(ErrorCode::invalid_argument, "cross-validation needs at least 2 folds");
  if (repeats < 1) fail(ErrorCode::invalid_argument, "cross-validation needs at least 1 repeat");
  const std::size_t n = ps.size();
  if (n < static_cast<std::size_t>(2 * folds))
    fail(ErrorCode::invalid_argument, "cross-validation needs n >= 2 * folds");

  // Canonical row order.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (ps.x()[a] != ps.x()[b]) return ps.x()[a] < ps.x()[b];
    return ps.y()[a] < ps.y()[b];
  });
  std::vector<double> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = ps.x()[order[i]];
    ys[i] = ps.y()[order[i]];
  }

  // fold_of[r * n + i]: fold of canonical row i in repeat r.
  std::vector<int> fold_of(static_cast<std::size_t>(repeats) * n);
  for (int r = 0; r < repeats; ++r) {
    Rng rng = make_stream(seed, static_cast<std::uint64_t>(r));
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t pos = 0; pos < n; ++pos)
      fold_of[r * n + perm[pos]] = static_cast<int>(pos % static_cast<std::size_t>(folds));
  }

  std::vector<std::pair<double, double>> diag(candidates.size());
  parallel_for(candidates.size(), threads, [&](std::size_t c) {
    const double h = candidates[c];
    // Pairwise weights are cached for moderate n only (n^2 doubles).
    const bool cache = n <= kMaxCachedRows;
    std::vector<double> w(cache ? n * n : 0);
    for (std::size_t i = 0; cache && i < n; ++i) {
      w[i * n + i] = kernel_profile(k.kind, 0.0);
      for (std::size_t j = i + 1; j < n; ++j)
        w[i * n + j] = w[j * n + i] = kernel_profile(k.kind, (xs[i] - xs[j]) / h);
    }
    double sse = 0.0;
    std::size_t used = 0;
    for (int r = 0; r < repeats; ++r) {
      const int* f = fold_of.data() + r * n;
      for (std::size_t j = 0; j < n; ++j) {
        double s0 = 0, s1 = 0, s2 = 0, t0 = 0, t1 = 0;
        const double* row = cache ? w.data() + j * n : nullptr;
        for (std::size_t i = 0; i < n; ++i) {
          if (f[i] == f[j]) continue;
          const double u = (xs[i] - xs[j]) / h;
          const double kw = cache ? row[i] : kernel_profile(k.kind, u);
          const double ku = kw * u;
          s0 += kw;
          s1 += ku;
          s2 += ku * u;
          t0 += kw * ys[i];
          t1 += ku * ys[i];
        }
        if (auto pred = local_linear_intercept(s0, s1, s2, t0, t1)) {
          const double e = ys[j] - *pred;
          sse += e * e;
          ++used;
        }
      }
    }
    diag[c] = {h, used == 0 ? kInf : sse / static_cast<double>(used)};
  });
  return pick_minimum(std::move(diag), BandwidthMethod::kfold_cv);
}

std::vector<double> log_spaced(double lo, double hi, std::size_t count) {
  if (!(lo > 0.0) || !(hi >= lo)) fail(ErrorCode::invalid_argument, "log_spaced needs 0 < lo <= hi");
  if (count == 0) return {};
  if (count == 1) return {lo};
  std::vector<double> out(count);
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < count; ++i)
    out[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1));
  out.front() = lo;
  out.back() = hi;
  return out;
}

std::vector<double> default_lscv_candidates(const Sample& s) {
  const double scale = dispersion_scale(s);
  return log_spaced(0.05 * scale, scale, 20);
}

std::vector<double> default_cv_candidates(const PairedSample& ps) {
  auto [mn, mx] = std::minmax_element(ps.x().begin(), ps.x().end());
  const double base = (*mx - *mn) / 10.0 * std::pow(static_cast<double>(ps.size()), -0.2);
  return log_spaced(0.25 * base, 4.0 * base, 20);
}

}  // namespace debias
