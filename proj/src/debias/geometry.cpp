#include "debias/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "debias/error.hpp"

namespace debias {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double hit_tolerance(std::span<const double> values) {
  double m = 0.0;
  for (double v : values)
    if (std::isfinite(v)) m = std::max(m, std::abs(v));
  return 1e-10 * m;
}

// -1 below, 0 at the level, +1 above, 2 undefined.
int classify(double v, double level, double tol) {
  if (!std::isfinite(v)) return 2;
  double d = v - level;
  if (std::abs(d) <= tol) return 0;
  return d > 0 ? 1 : -1;
}

double sq_dist(std::span<const double> p, std::span<const double> q) {
  double s = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    double d = p[k] - q[k];
    s += d * d;
  }
  return s;
}

void check_pair(const PointSet& a, const PointSet& b) {
  if (a.empty() || b.empty()) fail(ErrorCode::empty_set, "Hausdorff distance of an empty set");
  if (a.dim() != b.dim()) fail(ErrorCode::dimension_mismatch, "point sets differ in dimension");
}

}  // namespace

PointSet::PointSet(int dim) : dim_(dim) {
  if (dim != 1 && dim != 2) fail(ErrorCode::invalid_argument, "point set dimension must be 1 or 2");
}

PointSet::PointSet(int dim, std::vector<double> coords) : PointSet(dim) {
  if (coords.size() % dim != 0) fail(ErrorCode::invalid_argument, "incomplete point coordinates");
  for (double v : coords)
    if (!std::isfinite(v)) fail(ErrorCode::invalid_argument, "point coordinates must be finite");
  coords_ = std::move(coords);
}

void PointSet::deduplicate(double tol) {
  const std::size_t n = size();
  if (n < 2) return;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    for (int k = 0; k < dim_; ++k) {
      double pa = coords_[a * dim_ + k], pb = coords_[b * dim_ + k];
      if (pa != pb) return pa < pb;
    }
    return false;
  });
  std::vector<double> out;
  out.reserve(coords_.size());
  for (std::size_t r = 0; r < n; ++r) {
    const double* p = coords_.data() + idx[r] * dim_;
    bool dup = false;
    // A duplicate sorts next to the points it equals to within tol along x.
    for (std::size_t back = out.size() / dim_; back-- > 0;) {
      const double* q = out.data() + back * dim_;
      if (p[0] - q[0] > tol) break;
      bool same = true;
      for (int k = 0; k < dim_; ++k) same = same && std::abs(p[k] - q[k]) <= tol;
      if (same) {
        dup = true;
        break;
      }
    }
    if (!dup) out.insert(out.end(), p, p + dim_);
  }
  coords_ = std::move(out);
}

PointSet extract_level_set_1d(std::span<const double> values, const EvalGrid& grid, double level) {
  if (grid.dim() != 1) fail(ErrorCode::dimension_mismatch, "1-d level set needs a 1-d grid");
  if (values.size() != grid.size()) fail(ErrorCode::dimension_mismatch, "values do not match grid");
  const auto& x = grid.axis(0);
  const double tol = hit_tolerance(values);
  PointSet out(1);
  int prev = 2;
  for (std::size_t g = 0; g < values.size(); ++g) {
    int cls = classify(values[g], level, tol);
    if (cls == 0) {
      out.add(x[g]);
    } else if (g > 0 && (cls == 1 || cls == -1) && prev == -cls) {
      // Root of the linear interpolant between x[g-1] and x[g].
      double va = values[g - 1] - level, vb = values[g] - level;
      double t = va / (va - vb);
      out.add(x[g - 1] + t * (x[g] - x[g - 1]));
    }
    prev = cls;
  }
  return out;
}

PointSet extract_level_set_2d(std::span<const double> values, const EvalGrid& grid, double level) {
  if (grid.dim() != 2) fail(ErrorCode::dimension_mismatch, "2-d level set needs a 2-d grid");
  if (values.size() != grid.size()) fail(ErrorCode::dimension_mismatch, "values do not match grid");
  const auto& xs = grid.axis(0);
  const auto& ys = grid.axis(1);
  const std::size_t nx = xs.size(), ny = ys.size();
  auto v = [&](std::size_t ix, std::size_t iy) { return values[ix * ny + iy]; };
  auto above = [&](double val) { return val >= level; };
  auto frac = [&](double a, double b) { return (level - a) / (b - a); };

  // Crossing on the edge (ix, iy)-(ix+1, iy) and on (ix, iy)-(ix, iy+1).
  std::vector<double> hx((nx - 1) * ny, kNaN), vy(nx * (ny - 1), kNaN);
  PointSet out(2);
  for (std::size_t ix = 0; ix + 1 < nx; ++ix)
    for (std::size_t iy = 0; iy < ny; ++iy) {
      double a = v(ix, iy), b = v(ix + 1, iy);
      if (!std::isfinite(a) || !std::isfinite(b) || above(a) == above(b)) continue;
      double px = xs[ix] + frac(a, b) * (xs[ix + 1] - xs[ix]);
      hx[ix * ny + iy] = px;
      out.add(px, ys[iy]);
    }
  for (std::size_t ix = 0; ix < nx; ++ix)
    for (std::size_t iy = 0; iy + 1 < ny; ++iy) {
      double a = v(ix, iy), b = v(ix, iy + 1);
      if (!std::isfinite(a) || !std::isfinite(b) || above(a) == above(b)) continue;
      double py = ys[iy] + frac(a, b) * (ys[iy + 1] - ys[iy]);
      vy[ix * (ny - 1) + iy] = py;
      out.add(xs[ix], py);
    }

  for (std::size_t ix = 0; ix + 1 < nx; ++ix) {
    for (std::size_t iy = 0; iy + 1 < ny; ++iy) {
      // Corners c0 = (ix, iy), c1 = (ix+1, iy), c2 = (ix+1, iy+1), c3 = (ix, iy+1).
      const double c[4] = {v(ix, iy), v(ix + 1, iy), v(ix + 1, iy + 1), v(ix, iy + 1)};
      if (!std::all_of(c, c + 4, [](double q) { return std::isfinite(q); })) continue;
      int mask = 0;
      for (int q = 0; q < 4; ++q) mask |= above(c[q]) ? (1 << q) : 0;
      if (mask == 0 || mask == 15) continue;
      // Edge points: e0 bottom (c0-c1), e1 right (c1-c2), e2 top (c3-c2), e3 left (c0-c3).
      std::array<std::array<double, 2>, 4> e{};
      e[0] = {hx[ix * ny + iy], ys[iy]};
      e[1] = {xs[ix + 1], vy[(ix + 1) * (ny - 1) + iy]};
      e[2] = {hx[ix * ny + iy + 1], ys[iy + 1]};
      e[3] = {xs[ix], vy[ix * (ny - 1) + iy]};

      std::array<std::pair<int, int>, 2> segs{};
      int nseg = 1;
      switch (mask) {
        case 1: case 14: segs[0] = {0, 3}; break;
        case 2: case 13: segs[0] = {0, 1}; break;
        case 4: case 11: segs[0] = {1, 2}; break;
        case 8: case 7: segs[0] = {2, 3}; break;
        case 3: case 12: segs[0] = {1, 3}; break;
        case 6: case 9: segs[0] = {0, 2}; break;
        case 5: case 10: {
          nseg = 2;
          const bool center_above = above(0.25 * (c[0] + c[1] + c[2] + c[3]));
          // Corners on the side opposite to the centre are cut off.
          const bool cut_c1_c3 = (mask == 5) == center_above;
          if (cut_c1_c3) {
            segs[0] = {0, 1};
            segs[1] = {2, 3};
          } else {
            segs[0] = {0, 3};
            segs[1] = {1, 2};
          }
          break;
        }
        default: break;
      }
      const double spacing = std::min(xs[ix + 1] - xs[ix], ys[iy + 1] - ys[iy]);
      for (int sidx = 0; sidx < nseg; ++sidx) {
        const auto& p = e[segs[sidx].first];
        const auto& q = e[segs[sidx].second];
        const double len = std::hypot(q[0] - p[0], q[1] - p[1]);
        const auto pieces = static_cast<int>(std::ceil(len / spacing));
        for (int k = 1; k < pieces; ++k) {
          const double t = static_cast<double>(k) / pieces;
          out.add(p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]));
        }
      }
    }
  }
  out.deduplicate();
  return out;
}

PointSet extract_level_set(std::span<const double> values, const EvalGrid& grid, double level) {
  return grid.dim() == 1 ? extract_level_set_1d(values, grid, level)
                         : extract_level_set_2d(values, grid, level);
}

double directed_hausdorff(const PointSet& a, const PointSet& b) {
  check_pair(a, b);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto p = a.point(i);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < b.size() && best > worst; ++j) best = std::min(best, sq_dist(p, b.point(j)));
    worst = std::max(worst, best);
  }
  return std::sqrt(worst);
}

double hausdorff(const PointSet& a, const PointSet& b) {
  return std::max(directed_hausdorff(a, b), directed_hausdorff(b, a));
}

bool dilation_covers(const PointSet& center, double radius, const PointSet& query) {
  if (center.empty()) fail(ErrorCode::empty_set, "dilation of an empty set");
  if (!(radius >= 0.0)) fail(ErrorCode::invalid_argument, "dilation radius must be non-negative");
  if (query.empty()) return true;
  if (center.dim() != query.dim()) fail(ErrorCode::dimension_mismatch, "point sets differ in dimension");
  const double r2 = radius * radius;
  for (std::size_t i = 0; i < query.size(); ++i) {
    auto p = query.point(i);
    bool inside = false;
    for (std::size_t j = 0; j < center.size() && !inside; ++j) {
      // Compare distances, not squares, so a radius computed by hausdorff()
      // is never rejected by rounding.
      const double d2 = sq_dist(p, center.point(j));
      inside = d2 <= r2 || std::sqrt(d2) <= radius;
    }
    if (!inside) return false;
  }
  return true;
}

}  // namespace debias
