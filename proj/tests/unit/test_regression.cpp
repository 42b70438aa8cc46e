#include <doctest.h>

#include <cmath>
#include <random>

#include "debias/bandwidth.hpp"
#include "debias/error.hpp"
#include "debias/regression.hpp"
#include "debias/simulation.hpp"
#include "oracles.hpp"

using namespace debias;
using doctest::Approx;

namespace {
const KernelSpec g1{KernelKind::gaussian, 1};

std::vector<double> equispaced(double a, double b, size_t n) { return EvalGrid::uniform(a, b, n).axis(0); }

PairedSample make(const std::vector<double>& x, double (*f)(double)) {
  std::vector<double> y;
  for (double v : x) y.push_back(f(v));
  return PairedSample(x, y);
}
}  // namespace

TEST_CASE("local linear reproduces constants and lines") {
  const std::vector<double> X{0, 0.25, 0.5, 0.75, 1};
  const auto g = EvalGrid::uniform(0, 1, 21);
  const auto c = local_linear_fit(PairedSample(X, std::vector<double>(5, 3.0)), 0.3, g1, g);
  for (double v : c.values) CHECK(v == Approx(3.0).epsilon(1e-12));
  for (double h : {0.05, 0.3, 5.0}) {
    const auto r = local_linear_fit(make(X, [](double x) { return 2 * x + 1; }), h, g1, g);
    for (size_t i = 0; i < g.size(); ++i) CHECK(std::abs(r.values[i] - (2 * g.axis(0)[i] + 1)) < 1e-9);
  }
}

TEST_CASE("cubic second-derivative estimator is exact on cubics") {
  const auto X = equispaced(-1, 1, 9);
  const auto g = EvalGrid::uniform(-0.9, 0.9, 19);
  for (double b : {0.3, 1.0, 3.0}) {
    const auto cubic = local_poly3_second_deriv(make(X, [](double x) { return x * x * x; }), b, g1, g);
    const auto quad = local_poly3_second_deriv(make(X, [](double x) { return x * x; }), b, g1, g);
    const auto lin = local_poly3_second_deriv(make(X, [](double x) { return 4 - 2 * x; }), b, g1, g);
    CHECK(cubic.meta.derivative == 2);
    for (size_t i = 0; i < g.size(); ++i) {
      CHECK(std::abs(cubic.values[i] - 6 * g.axis(0)[i]) < 1e-6);
      CHECK(std::abs(quad.values[i] - 2.0) < 1e-6);
      CHECK(std::abs(lin.values[i]) < 1e-8);
    }
  }
}

TEST_CASE("debiased smoother") {
  const auto X = equispaced(0, 1, 41);
  const auto g = EvalGrid::uniform(0, 1, 51);
  const auto lin = make(X, [](double x) { return 0.5 - 3 * x; });
  const auto a = debiased_local_linear(lin, 0.2, 1.0, g1, g);
  const auto b = local_linear_fit(lin, 0.2, g1, g);
  for (size_t i = 0; i < g.size(); ++i) CHECK(std::abs(a.values[i] - b.values[i]) < 1e-9);

  const auto sq = make(X, [](double x) { return x * x; });
  const auto d = debiased_local_linear(sq, 0.2, 1.0, g1, g);
  const auto p = local_linear_fit(sq, 0.2, g1, g);
  double ed = 0, ep = 0;
  for (size_t i = 0; i < g.size(); ++i) {
    const double x = g.axis(0)[i];
    if (x < 0.2 - 1e-12 || x > 0.8 + 1e-12) continue;
    ed = std::max(ed, std::abs(d.values[i] - x * x));
    ep = std::max(ep, std::abs(p.values[i] - x * x));
  }
  CHECK(ed < ep);

  std::mt19937_64 rng(4);
  auto noisy = gen_regression_sine(200, rng);
  for (double tau : {1.0, 0.6}) {
    const double h = 0.08;
    const auto full = debiased_local_linear(noisy, h, tau, g1, g);
    const auto r = local_linear_fit(noisy, h, g1, g);
    const auto r2 = local_poly3_second_deriv(noisy, h / tau, g1, g);
    for (size_t i = 0; i < g.size(); ++i) CHECK(std::abs(full.values[i] - (r.values[i] - 0.5 * h * h * r2.values[i])) < 1e-12);
  }
}

TEST_CASE("property: weight form and WLS form agree") {
  std::mt19937_64 rng(8);
  const auto ps = gen_regression_sine(150, rng);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  const double h = 0.1;
  std::vector<double> q(100);
  for (auto& v : q) v = u(rng);
  std::sort(q.begin(), q.end());
  const auto fit = local_linear_fit(ps, h, g1, EvalGrid::line(q));
  const auto cub = local_poly3_second_deriv(ps, h, g1, EvalGrid::line(q));
  for (size_t j = 0; j < q.size(); ++j) {
    const double x = q[j];
    double s1 = 0, s2 = 0;
    std::vector<double> k(ps.size());
    for (size_t i = 0; i < ps.size(); ++i) {
      k[i] = oracle::phi((x - ps.x()[i]) / h);
      s1 += k[i] * (ps.x()[i] - x);
      s2 += k[i] * (ps.x()[i] - x) * (ps.x()[i] - x);
    }
    double num = 0, den = 0;
    for (size_t i = 0; i < ps.size(); ++i) {
      const double w = k[i] * (s2 - (ps.x()[i] - x) * s1);
      num += w * ps.y()[i];
      den += w;
    }
    CHECK(std::abs(fit.values[j] - num / den) < 1e-9);
    const auto beta1 = oracle::wls_poly(ps.x(), ps.y(), k, x, 1);
    CHECK(std::abs(fit.values[j] - beta1[0]) < 1e-9);
    const auto beta3 = oracle::wls_poly(ps.x(), ps.y(), k, x, 3);
    CHECK(cub.values[j] == Approx(2.0 * beta3[2]).epsilon(1e-7));
  }
}

TEST_CASE("property: affine equivariance in the response") {
  std::mt19937_64 rng(12);
  const auto ps = gen_regression_sine(120, rng);
  std::vector<double> y2;
  for (double v : ps.y()) y2.push_back(2.5 * v - 1.0);
  const auto g = EvalGrid::uniform(0, 1, 33);
  const auto a = debiased_local_linear(ps, 0.1, 1.0, g1, g);
  const auto b = debiased_local_linear(PairedSample(ps.x(), y2), 0.1, 1.0, g1, g);
  for (size_t i = 0; i < g.size(); ++i) CHECK(std::abs(b.values[i] - (2.5 * a.values[i] - 1.0)) < 1e-12);
}

TEST_CASE("local linear on the sine model with CV bandwidth") {
  int good = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto rng = make_stream(31, seed);
    const auto ps = gen_regression_sine(500, rng);
    const auto cands = log_spaced(0.01, 0.5, 20);
    const double h = kfold_cv_bandwidth(ps, 5, 10, cands, seed).h;
    const auto fit = local_linear_fit(ps, h, g1, EvalGrid::uniform(0.1, 0.9, 81));
    double err = 0;
    for (size_t i = 0; i < fit.values.size(); ++i)
      err = std::max(err, std::abs(fit.values[i] - std::sin(std::numbers::pi * fit.grid.axis(0)[i])));
    good += err < 0.1;
  }
  CHECK(good >= 18);
}

TEST_CASE("scaled gram") {
  const auto single = scaled_gram(std::vector<double>{0.4}, 0.4, 1.0, g1);
  CHECK(single[0] == Approx(0.3989423).epsilon(1e-7));
  for (size_t i = 0; i < 16; ++i)
    if (i != 0) CHECK(single[i] == 0.0);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> X(50000);
  for (auto& v : X) v = u(rng);
  const auto G = scaled_gram(X, 0.5, 0.05, g1);
  const auto omega = moment_matrix(g1, 3);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      CHECK(std::abs(G[4 * i + j] - omega(i, j)) < 0.05 * std::max(1.0, omega(i, j)));

  const auto sym = scaled_gram(std::vector<double>{-1, -0.5, 0.5, 1}, 0.0, 0.7, g1);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if ((i + j) % 2) CHECK(std::abs(sym[4 * i + j]) < 1e-15);
}

TEST_CASE("degenerate windows") {
  const PairedSample ps({0, 0.01, 0.02, 0.03, 0.04, 0.05}, {1, 2, 3, 4, 5, 6});
  const auto far = EvalGrid::uniform(50, 60, 20);
  CHECK_THROWS_AS(local_linear_fit(ps, 0.01, KernelSpec{KernelKind::biweight, 1}, far), Error);
  CHECK(!local_linear_intercept(0.0, 0.0, 0.0, 0.0, 0.0).has_value());
  CHECK(*local_linear_intercept(2.0, 0.0, 1.0, 6.0, 0.0) == Approx(3.0));
  CHECK_THROWS_AS(PairedSample({1, 2, 3}, {1, 2, 3}), Error);
  CHECK_THROWS_AS(PairedSample({1, 2, 3, 4, 5}, {1, 2, 3, 4}), Error);
}

TEST_CASE("evaluator: batched weights equal explicit refits") {
  std::mt19937_64 rng(19);
  const auto ps = gen_regression_sine(60, rng);
  const auto g = EvalGrid::uniform(0.1, 0.9, 25);
  const LocalPolyEvaluator ev(ps, g, g1, 0.15, 1.0);
  std::vector<double> w(60, 0.0);
  std::vector<double> xs, ys;
  std::uniform_int_distribution<size_t> pick(0, 59);
  for (int i = 0; i < 60; ++i) {
    const size_t k = pick(rng);
    w[k] += 1;
    xs.push_back(ps.x()[k]);
    ys.push_back(ps.y()[k]);
  }
  std::vector<double> rows(2 * 60, 1.0);
  std::copy(w.begin(), w.end(), rows.begin() + 60);
  std::vector<LocalPolyEvaluator::Values> out;
  ev.evaluate_batch(rows, 2, out);
  const auto base = debiased_local_linear(ps, 0.15, 1.0, g1, g);
  const auto refit = debiased_local_linear(PairedSample(xs, ys), 0.15, 1.0, g1, g);
  for (size_t i = 0; i < g.size(); ++i) {
    CHECK(out[0].debiased[i] == Approx(base.values[i]).epsilon(1e-9));
    CHECK(out[1].debiased[i] == Approx(refit.values[i]).epsilon(1e-9));
  }
}

TEST_CASE("default regression grid spans the covariates") {
  const PairedSample ps({0.2, 0.9, 0.4, 0.5, 0.3}, {1, 2, 3, 4, 5});
  const auto g = default_regression_grid(ps);
  CHECK(g.size() == 512);
  CHECK(g.axis(0).front() == 0.2);
  CHECK(g.axis(0).back() == Approx(0.9));
}
