#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "debias/grid.hpp"

namespace debias {

//! Finite point cloud in R^d, d in {1, 2}; may be empty.
class PointSet {
 public:
  explicit PointSet(int dim = 1);
  PointSet(int dim, std::vector<double> coords);

  int dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return coords_.size() / dim_; }
  bool empty() const noexcept { return coords_.empty(); }
  std::span<const double> point(std::size_t i) const noexcept {
    return {coords_.data() + i * dim_, static_cast<std::size_t>(dim_)};
  }
  const std::vector<double>& coords() const noexcept { return coords_; }

  void add(double x) { coords_.push_back(x); }
  void add(double x, double y) {
    coords_.push_back(x);
    coords_.push_back(y);
  }

  //! Sorts lexicographically and drops points within tol of a neighbour.
  void deduplicate(double tol = 1e-12);

 private:
  int dim_;
  std::vector<double> coords_;
};

//! Crossings of the piecewise-linear interpolant of values through level.
//! Grid values within 1e-10 max|values| of the level count as exact hits.
//! NaN values break the interpolant.
PointSet extract_level_set_1d(std::span<const double> values, const EvalGrid& grid, double level);

//! Marching squares with linear edge interpolation. Saddle cells are split
//! according to the mean of their four corner values. Each cell segment is
//! densified so consecutive points are at most one grid spacing apart.
PointSet extract_level_set_2d(std::span<const double> values, const EvalGrid& grid, double level);

PointSet extract_level_set(std::span<const double> values, const EvalGrid& grid, double level);

//! sup over a of the distance from a to the set b.
double directed_hausdorff(const PointSet& a, const PointSet& b);

double hausdorff(const PointSet& a, const PointSet& b);

//! Whether every query point lies in center (+) radius.
bool dilation_covers(const PointSet& center, double radius, const PointSet& query);

}  // namespace debias
