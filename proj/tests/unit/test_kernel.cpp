#include <doctest.h>

#include <array>
#include <algorithm>
#include <cmath>
#include <random>

#include "debias/error.hpp"
#include "debias/kernel.hpp"
#include "oracles.hpp"

using namespace debias;
using doctest::Approx;

namespace {
const KernelSpec g1{KernelKind::gaussian, 1};
const KernelSpec g2{KernelKind::gaussian, 2};
const KernelSpec bw1{KernelKind::biweight, 1};

double at(const KernelSpec& k, double x) { return kernel_eval(k, std::array{x}); }
double at(const KernelSpec& k, double x, double y) { return kernel_eval(k, std::array{x, y}); }
}  // namespace

TEST_CASE("kernel_eval closed forms") {
  CHECK(at(g1, 0.0) == Approx(0.3989423).epsilon(1e-7));
  CHECK(at(g1, 1.0) == at(g1, -1.0));
  CHECK(at(g2, 0.0, 0.0) == Approx(1.0 / (2.0 * std::numbers::pi)).epsilon(1e-12));
  CHECK(at(g2, 0.0, 0.0) == Approx(0.1591549).epsilon(1e-7));
  CHECK(at(bw1, 0.0) == Approx(15.0 / 16.0));
  CHECK(at(bw1, 1.5) == 0.0);
}

TEST_CASE("kernel_laplacian closed forms") {
  CHECK(kernel_laplacian(g1, std::array{0.0}) == Approx(-0.3989423).epsilon(1e-7));
  CHECK(std::abs(kernel_laplacian(g1, std::array{1.0})) < 1e-15);
  CHECK(kernel_laplacian(g2, std::array{0.0, 0.0}) == Approx(-0.3183099).epsilon(1e-7));
}

TEST_CASE("kernel_ck") {
  CHECK(kernel_ck(g1) == 1.0);
  CHECK(kernel_ck(bw1) == Approx(1.0 / 7.0).epsilon(1e-10));
  CHECK(kernel_ck(g2) > 0.0);
}

TEST_CASE("debiased kernel closed forms") {
  CHECK(DebiasedKernel(g1, 1.0)(std::array{0.0}) == Approx(0.5984134).epsilon(1e-7));
  CHECK(DebiasedKernel(g1, 1.0)(std::array{1.0}) == Approx(0.2419707).epsilon(1e-7));
  CHECK(DebiasedKernel(g2, 1.0)(std::array{0.0, 0.0}) == Approx(0.3183099).epsilon(1e-7));
  CHECK_THROWS_AS(DebiasedKernel(g1, 0.0), Error);
}

TEST_CASE("moment matrices") {
  const auto m1 = moment_matrix(g1, 1);
  CHECK(m1.entries() == std::vector<double>{1, 0, 0, 1});
  const auto m3 = moment_matrix(g1, 3);
  const std::vector<double> expect{1, 0, 1, 0, 0, 1, 0, 3, 1, 0, 3, 0, 0, 3, 0, 15};
  for (size_t i = 0; i < 16; ++i) CHECK(m3.entries()[i] == Approx(expect[i]).epsilon(1e-12));
  const auto mb = moment_matrix(bw1, 3);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      CHECK(mb(i, j) == mb(j, i));
      if ((i + j) % 2) CHECK(std::abs(mb(i, j)) < 1e-14);
    }
  CHECK(mb(0, 0) == Approx(1.0).epsilon(1e-10));
  CHECK_THROWS_AS(moment_matrix(g1, 2), Error);
}

TEST_CASE("property: kernels integrate to one and M_tau is fourth order") {
  for (const auto& k : {g1, bw1}) {
    const double lim = k.kind == KernelKind::gaussian ? 10.0 : 1.0;
    CHECK(std::abs(oracle::simpson([&](double x) { return at(k, x); }, -lim, lim) - 1.0) < 1e-8);
  }
  CHECK(std::abs(oracle::simpson2d([&](double x, double y) { return at(g2, x, y); }, -10, 10) - 1.0) < 1e-8);

  for (double tau : {1.0, 0.5, 2.0}) {
    const DebiasedKernel dk(g1, tau);
    auto m = [&](double x) { return dk(std::array{x}); };
    const double lim = 12.0 / std::min(tau, 1.0);  // the pilot term has scale 1 / tau
    CHECK(std::abs(oracle::simpson(m, -lim, lim, 40000) - 1.0) < 1e-8);
    CHECK(std::abs(oracle::simpson([&](double x) { return x * m(x); }, -lim, lim, 40000)) < 1e-8);
    CHECK(std::abs(oracle::simpson([&](double x) { return x * x * m(x); }, -lim, lim, 40000)) < 1e-8);
  }
  const DebiasedKernel dk2(g2, 1.0);
  auto m2 = [&](double x, double y) { return dk2(std::array{x, y}); };
  CHECK(std::abs(oracle::simpson2d(m2, -10, 10) - 1.0) < 1e-8);
  CHECK(std::abs(oracle::simpson2d([&](double x, double y) { return x * m2(x, y); }, -10, 10)) < 1e-8);
  CHECK(std::abs(oracle::simpson2d([&](double x, double y) { return x * x * m2(x, y); }, -10, 10)) < 1e-8);
}

TEST_CASE("property: laplacian matches finite differences") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.5, 2.5);
  const double e = 1e-4;
  for (int i = 0; i < 100; ++i) {
    const double x = u(rng), y = u(rng);
    for (const auto& k : {g1, bw1}) {
      const double fd = (at(k, x + e) - 2 * at(k, x) + at(k, x - e)) / (e * e);
      if (k.kind == KernelKind::biweight && std::abs(std::abs(x) - 1.0) < 2 * e) continue;
      CHECK(std::abs(kernel_laplacian(k, std::array{x}) - fd) < 1e-6);
    }
    const double fd2 = (at(g2, x + e, y) + at(g2, x - e, y) + at(g2, x, y + e) + at(g2, x, y - e) -
                        4 * at(g2, x, y)) /
                       (e * e);
    CHECK(std::abs(kernel_laplacian(g2, std::array{x, y}) - fd2) < 1e-6);
  }
}

TEST_CASE("property: gaussian moment matrix agrees with quadrature") {
  const auto m3 = moment_matrix(g1, 3);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      const double q = oracle::simpson([&](double u) { return std::pow(u, i + j) * oracle::phi(u); }, -12, 12);
      CHECK(std::abs(m3(i, j) - q) < 1e-8);
    }
}

TEST_CASE("kernel validation") {
  CHECK_THROWS_AS(validate(KernelSpec{KernelKind::gaussian, 3}), Error);
  CHECK_THROWS_AS(kernel_eval(g2, std::array{1.0}), Error);
  CHECK(kernel_moment(KernelKind::gaussian, 4) == Approx(3.0));
}
