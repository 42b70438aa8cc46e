#include "debias/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "debias/error.hpp"

namespace debias {
namespace {

void check_axis(const std::vector<double>& a) {
  if (a.size() < 2) fail(ErrorCode::invalid_argument, "grid axes need at least 2 points");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::isfinite(a[i])) fail(ErrorCode::invalid_argument, "grid coordinates must be finite");
    if (i > 0 && !(a[i] > a[i - 1]))
      fail(ErrorCode::invalid_argument, "grid coordinates must be strictly increasing");
  }
}

}  // namespace

std::vector<double> linspace(double lo, double hi, std::size_t count) {
  std::vector<double> out(count);
  if (count == 1) {
    out[0] = lo;
    return out;
  }
  double step = (hi - lo) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) out[i] = lo + step * static_cast<double>(i);
  out.back() = hi;
  return out;
}

EvalGrid EvalGrid::line(std::vector<double> x) {
  check_axis(x);
  EvalGrid g;
  g.x_ = std::move(x);
  return g;
}

EvalGrid EvalGrid::tensor(std::vector<double> x, std::vector<double> y) {
  check_axis(x);
  check_axis(y);
  EvalGrid g;
  g.x_ = std::move(x);
  g.y_ = std::move(y);
  return g;
}

EvalGrid EvalGrid::uniform(double lo, double hi, std::size_t count) {
  if (!(hi > lo)) fail(ErrorCode::invalid_argument, "grid range must satisfy lo < hi");
  return line(linspace(lo, hi, count));
}

EvalGrid EvalGrid::uniform2d(std::array<double, 2> lo, std::array<double, 2> hi,
                             std::size_t nx, std::size_t ny) {
  if (!(hi[0] > lo[0]) || !(hi[1] > lo[1]))
    fail(ErrorCode::invalid_argument, "grid range must satisfy lo < hi");
  return tensor(linspace(lo[0], hi[0], nx), linspace(lo[1], hi[1], ny));
}

std::array<double, 2> EvalGrid::point(std::size_t idx) const noexcept {
  if (y_.empty()) return {x_[idx], 0.0};
  return {x_[idx / y_.size()], y_[idx % y_.size()]};
}

double EvalGrid::min_spacing(int k) const noexcept {
  const auto& a = axis(k);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < a.size(); ++i) best = std::min(best, a[i] - a[i - 1]);
  return best;
}

}  // namespace debias
