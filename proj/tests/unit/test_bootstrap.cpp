#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "debias/bootstrap.hpp"
#include "debias/error.hpp"
#include "debias/simulation.hpp"
#include "oracles.hpp"

using namespace debias;
using doctest::Approx;

namespace {
const KernelSpec g1{KernelKind::gaussian, 1};

BootstrapConfig config(size_t B, std::uint64_t seed, Metric m = Metric::sup, unsigned threads = 1) {
  BootstrapConfig c;
  c.replicates = B;
  c.seed = seed;
  c.metric = m;
  c.threads = threads;
  return c;
}

Sample mixture(size_t n, std::uint64_t seed) {
  auto rng = make_stream(seed, 0);
  return gen_density_1d(n, rng);
}
}  // namespace

TEST_CASE("resampling") {
  Rng rng(1);
  CHECK(resample(1, rng) == std::vector<size_t>{0});
  Rng a = make_stream(9, 4), b = make_stream(9, 4);
  CHECK(resample(50, a) == resample(50, b));
  CHECK(replicate_counts(30, 5, 2) == replicate_counts(30, 5, 2));
  CHECK(replicate_counts(30, 5, 2) != replicate_counts(30, 5, 3));

  std::vector<double> freq(10, 0.0);
  Rng big(123);
  for (int r = 0; r < 10000; ++r)
    for (size_t i : resample(10, big)) freq[i] += 1;
  const double sigma = std::sqrt(1e5 * 0.1 * 0.9);
  for (double f : freq) CHECK(std::abs(f - 1e4) < 3 * sigma);
  const auto counts = replicate_counts(40, 1, 0);
  CHECK(std::accumulate(counts.begin(), counts.end(), 0.0) == 40.0);
  CHECK_THROWS_AS(resample(0, rng), Error);
}

TEST_CASE("sup distance") {
  const std::vector<double> z{0, 0, 0}, f{0, 1, 2};
  CHECK(sup_distance(f, z) == 2.0);
  CHECK(sup_distance(f, f) == 0.0);
  CHECK(sup_distance(f, z, std::vector<double>{1, 1, 4}) == 1.0);
  // The first point falls under 5% of the largest scale and is excluded.
  CHECK(sup_distance(std::vector<double>{9, 1, 0}, z, std::vector<double>{0.01, 1, 1}) == 1.0);
  CHECK_THROWS_AS(sup_distance(f, z, std::vector<double>{0, 0, 0}), Error);
  CHECK_THROWS_AS(sup_distance(f, std::vector<double>{0, 0}), Error);
}

TEST_CASE("bootstrap quantile") {
  CHECK(bootstrap_quantile(std::vector<double>(7, 0.7), 0.2).t_hat == 0.7);
  std::vector<double> v{7, 3, 10, 1, 5, 2, 9, 4, 8, 6};
  const auto q = bootstrap_quantile(v, 0.05);
  CHECK(q.t_hat == 10.0);
  CHECK(std::is_sorted(q.replicate_stats.begin(), q.replicate_stats.end()));
  CHECK(bootstrap_quantile(v, 0.5).t_hat == 5.0);
  CHECK(bootstrap_quantile(v, 0.1).t_hat == 9.0);
  CHECK(quantile_rank(10, 0.05) == 10);
  CHECK(quantile_rank(500, 0.05) == 475);

  std::vector<double> drops(20, 1.0);
  drops[0] = drops[1] = NAN;
  CHECK(bootstrap_quantile(drops, 0.05).dropped == 2);
  drops[2] = INFINITY;
  CHECK_THROWS_AS(bootstrap_quantile(drops, 0.05), Error);
  CHECK_THROWS_AS(bootstrap_quantile({}, 0.05), Error);
  CHECK_THROWS_AS(bootstrap_quantile(v, 1.0), Error);
}

TEST_CASE("property: quantiles and bands are nested across levels") {
  std::mt19937_64 rng(5);
  std::exponential_distribution<double> e;
  std::vector<double> v(333);
  for (auto& x : v) x = e(rng);
  const auto q = bootstrap_quantile(v, 0.5);
  double prev = -1;
  for (double a : {0.5, 0.3, 0.2, 0.1, 0.05, 0.01, 0.001}) {
    const double t = requantile(q, a).t_hat;
    CHECK(t >= prev);
    prev = t;
  }
  const auto band = density_confidence_band(mixture(300, 1), 0.6, 1.0, g1, EvalGrid::uniform(-3, 7, 64),
                                            config(200, 3));
  const auto b90 = band_at_level(band, 0.10), b99 = band_at_level(band, 0.01);
  for (size_t i = 0; i < band.center.size(); ++i) {
    CHECK(b99.lower[i] <= b90.lower[i]);
    CHECK(b99.upper[i] >= b90.upper[i]);
  }
}

TEST_CASE("density band structure") {
  const auto s = mixture(400, 2);
  const auto g = EvalGrid::uniform(-3, 7, 101);
  const auto band = density_confidence_band(s, 0.5, 1.0, g1, g, config(150, 11));
  const auto center = debiased_kde_eval(s, 0.5, 1.0, g1, g).values;
  CHECK(band.kind == BandKind::fixed);
  for (size_t i = 0; i < g.size(); ++i) {
    CHECK(band.center[i] == Approx(center[i]).epsilon(1e-12));
    CHECK(band.lower[i] <= band.center[i]);
    CHECK(band.upper[i] >= band.center[i]);
    CHECK(std::abs((band.upper[i] - band.lower[i]) - 2 * band.t_hat) < 1e-12);
  }
  CHECK(band.quantile.replicate_stats.size() == 150);

  auto vcfg = config(150, 11, Metric::weighted_sup);
  const auto var = density_confidence_band(s, 0.5, 1.0, g1, g, vcfg);
  const auto plain = kde_eval(s, 0.5, g1, g).values;
  CHECK(var.kind == BandKind::variable);
  const double mx = *std::max_element(plain.begin(), plain.end());
  for (size_t i = 0; i < g.size(); ++i) {
    CHECK(var.scale[i] == Approx(std::sqrt(plain[i])).epsilon(1e-12));
    if (plain[i] >= kWeightFloor * mx)
      CHECK(std::abs((var.upper[i] - var.lower[i]) / var.scale[i] - 2 * var.t_hat) < 1e-12);
  }
}

TEST_CASE("single replicate band equals that replicate's sup distance") {
  const auto s = mixture(200, 3);
  const auto g = EvalGrid::uniform(-3, 7, 80);
  const auto band = density_confidence_band(s, 0.5, 1.0, g1, g, config(1, 99));
  const auto counts = replicate_counts(s.size(), 99, 0);
  std::vector<double> dup;
  for (size_t i = 0; i < s.size(); ++i)
    for (int c = 0; c < static_cast<int>(counts[i]); ++c) dup.push_back(s.at(i, 0));
  const auto star = debiased_kde_eval(Sample::from_column(dup), 0.5, 1.0, g1, g).values;
  const auto center = debiased_kde_eval(s, 0.5, 1.0, g1, g).values;
  double sup = 0;
  for (size_t i = 0; i < g.size(); ++i) sup = std::max(sup, std::abs(star[i] - center[i]));
  CHECK(band.t_hat == Approx(sup).epsilon(1e-10));
  CHECK(std::abs((band.upper[0] - band.center[0]) - sup) < 1e-10);
}

TEST_CASE("property: replicate statistics measure distance to the original-sample estimate") {
  // Stub estimator: the weighted sample mean, defined on a two-point grid.
  const std::vector<double> x{1, 4, 2, 8, 5, 7, 3, 6};
  const size_t n = x.size();
  auto est = [&](std::span<const double> w) {
    double m = 0;
    for (size_t i = 0; i < n; ++i) m += w[i] * x[i];
    m /= static_cast<double>(n);
    return std::vector<double>{m, 2 * m};
  };
  const auto g = EvalGrid::uniform(0, 1, 2);
  const auto band = bootstrap_band(est, n, g, config(60, 5));
  CHECK(band.center[0] == Approx(4.5));
  std::vector<double> expect;
  for (size_t r = 0; r < 60; ++r) {
    const auto c = replicate_counts(n, 5, r);
    double m = 0;
    for (size_t i = 0; i < n; ++i) m += c[i] * x[i];
    expect.push_back(2 * std::abs(m / static_cast<double>(n) - 4.5));
  }
  std::sort(expect.begin(), expect.end());
  REQUIRE(band.quantile.replicate_stats.size() == expect.size());
  for (size_t r = 0; r < expect.size(); ++r) CHECK(band.quantile.replicate_stats[r] == Approx(expect[r]).epsilon(1e-13));
}

TEST_CASE("property: results do not depend on the thread count") {
  const auto s = mixture(300, 4);
  const auto g = EvalGrid::uniform(-3, 7, 64);
  const auto a = density_confidence_band(s, 0.5, 1.0, g1, g, config(100, 8, Metric::sup, 1));
  const auto b = density_confidence_band(s, 0.5, 1.0, g1, g, config(100, 8, Metric::sup, 4));
  CHECK(a.t_hat == b.t_hat);
  CHECK(a.quantile.replicate_stats == b.quantile.replicate_stats);
  CHECK(a.upper == b.upper);
  auto rng = make_stream(3, 1);
  const auto ps = gen_invreg_exp(500, rng);
  const auto rg = EvalGrid::uniform(0.1, 0.9, 128);
  const auto ra = invreg_confidence_set(ps, 0.5, 0.1, 1.0, g1, rg, config(80, 2, Metric::hausdorff, 1));
  const auto rb = invreg_confidence_set(ps, 0.5, 0.1, 1.0, g1, rg, config(80, 2, Metric::hausdorff, 3));
  CHECK(ra.region.radius == rb.region.radius);
  CHECK(ra.replicate_roots == rb.replicate_roots);
}

TEST_CASE("regression band") {
  std::vector<double> x, y;
  for (int i = 0; i < 50; ++i) {
    x.push_back(i / 49.0);
    y.push_back(1 - 0.5 * x.back());
  }
  const PairedSample ps(x, y);
  const auto g = EvalGrid::uniform(0, 1, 40);
  const auto band = regression_confidence_band(ps, 0.2, 1.0, g1, g, config(50, 1));
  CHECK(band.t_hat < 1e-9);
  for (size_t i = 0; i < g.size(); ++i) {
    const double t = 1 - 0.5 * g.axis(0)[i];
    CHECK(band.lower[i] <= t + 1e-9);
    CHECK(band.upper[i] >= t - 1e-9);
  }
  CHECK_THROWS_AS(regression_confidence_band(ps, 0.2, 1.0, g1, g, config(50, 1, Metric::weighted_sup)), Error);
}

TEST_CASE("level-set confidence sets") {
  const auto s = mixture(500, 6);
  const auto g = EvalGrid::uniform(-3, 7, 200);
  const BootstrapConfig cfg = config(60, 12, Metric::hausdorff);
  CHECK_THROWS_AS(levelset_confidence_set(s, 5.0, 0.5, 1.0, g1, g, cfg), Error);
  CHECK_THROWS_AS(levelset_confidence_set(s, 0.05, 0.5, 1.0, g1, g, config(60, 12)), Error);

  // At h = 0.5 the smoothed trough is near 0.07 and the lower mode near 0.14, so
  // level 0.1 cuts the density in two intervals with four endpoints.
  const double level = 0.1, h = 0.5;
  const auto set = levelset_confidence_set(s, level, h, 1.0, g1, g, cfg);
  const auto center = extract_level_set_1d(debiased_kde_eval(s, h, 1.0, g1, g).values, g, level);
  CHECK(set.center.size() == center.size());
  CHECK(center.size() == 4);
  std::vector<double> stats;
  for (size_t r = 0; r < cfg.replicates; ++r) {
    const auto c = replicate_counts(s.size(), cfg.seed, r);
    std::vector<double> dup;
    for (size_t i = 0; i < s.size(); ++i)
      for (int k = 0; k < static_cast<int>(c[i]); ++k) dup.push_back(s.at(i, 0));
    const auto star = extract_level_set_1d(debiased_kde_eval(Sample::from_column(dup), h, 1.0, g1, g).values, g, level);
    std::vector<std::vector<double>> a, b;
    for (size_t i = 0; i < star.size(); ++i) a.push_back({star.point(i)[0]});
    for (size_t i = 0; i < center.size(); ++i) b.push_back({center.point(i)[0]});
    if (!a.empty()) stats.push_back(oracle::hausdorff(a, b));
  }
  CHECK(set.radius == Approx(bootstrap_quantile(stats, cfg.alpha).t_hat).epsilon(1e-8));
}

TEST_CASE("inversion set") {
  ConfidenceBand band;
  band.grid = EvalGrid::uniform(0, 1, 5);
  band.center = {0.1, 0.3, 0.5, 0.7, 0.9};
  band.t_hat = 0.0;
  auto none = levelset_inversion_set(band, 0.5);
  CHECK(std::count(none.begin(), none.end(), 1) == 0);
  std::vector<std::uint8_t> prev = none;
  for (double t : {0.1, 0.25, 0.45}) {
    band.t_hat = t;
    const auto m = levelset_inversion_set(band, 0.5);
    for (size_t i = 0; i < m.size(); ++i) CHECK(m[i] >= prev[i]);
    prev = m;
  }
  CHECK(std::count(prev.begin(), prev.end(), 1) == 5);
  band.center.assign(5, 0.5);
  band.t_hat = 0.01;
  const auto full = levelset_inversion_set(band, 0.5);
  CHECK(std::count(full.begin(), full.end(), 1) == 5);
  band.kind = BandKind::variable;
  CHECK_THROWS_AS(levelset_inversion_set(band, 0.5), Error);
}

TEST_CASE("inverse-regression sets") {
  std::vector<double> x;
  for (int i = 0; i < 60; ++i) x.push_back(i / 59.0);
  const PairedSample ps(x, x);
  const auto g = EvalGrid::uniform(0, 1, 101);
  const auto set = invreg_confidence_set(ps, 0.5, 0.2, 1.0, g1, g, config(40, 1, Metric::hausdorff));
  REQUIRE(set.region.center.size() == 1);
  CHECK(set.center_root == Approx(0.5).epsilon(1e-8));
  CHECK(set.region.radius < 1e-8);
  CHECK_THROWS_AS(invreg_confidence_set(ps, 3.0, 0.2, 1.0, g1, g, config(40, 1, Metric::hausdorff)), Error);

  auto rng = make_stream(12, 1);
  const auto noisy = gen_invreg_exp(500, rng);
  const auto rs = invreg_confidence_set(noisy, 0.5, 0.1, 1.0, g1, EvalGrid::uniform(0.1, 0.9, 256),
                                        config(100, 4, Metric::hausdorff));
  double prev = 0;
  for (double a : {0.5, 0.2, 0.1, 0.05, 0.01}) {
    const double r = requantile(rs.region.quantile, a).t_hat;
    CHECK(r >= prev);
    prev = r;
  }
  CHECK(rs.replicate_roots.size() == rs.region.quantile.replicate_stats.size());
  CHECK(rs.non_singleton_fraction >= 0.0);
  CHECK(rs.non_singleton_fraction <= 1.0);
}

TEST_CASE("normal-approximation interval") {
  const auto same = invreg_normal_ci(0.4, std::vector<double>(5, 0.4), 0.05);
  CHECK(same.lower == 0.4);
  CHECK(same.upper == 0.4);
  // Two roots at 0.7 +- c have sample sd c * sqrt(2).
  const double c = 0.01 / std::sqrt(2.0);
  const auto ci = invreg_normal_ci(0.7, std::vector<double>{0.7 - c, 0.7 + c}, 0.05);
  CHECK(ci.lower == Approx(0.68040).epsilon(1e-5));
  CHECK(ci.upper == Approx(0.71960).epsilon(1e-5));
  CHECK(ci.upper - ci.lower == Approx(2 * 1.959964 * 0.01).epsilon(1e-6));
  CHECK(normal_quantile(0.975) == Approx(1.959964).epsilon(1e-6));
  CHECK_THROWS_AS(invreg_normal_ci(0.7, std::vector<double>{0.7}, 0.05), Error);
}

TEST_CASE("config validation") {
  BootstrapConfig c;
  c.replicates = 0;
  CHECK_THROWS_AS(validate(c), Error);
  c.replicates = 10;
  c.alpha = 0.0;
  CHECK_THROWS_AS(validate(c), Error);
  c.alpha = 0.1;
  CHECK_NOTHROW(validate(c));
  CHECK(std::string(to_string(Metric::weighted_sup)) == "weighted_sup");
}
