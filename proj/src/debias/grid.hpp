#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace debias {

//! Evaluation points: a strictly increasing line (d = 1) or a tensor
//! product of two such lines (d = 2). Grid values are stored with the
//! second axis varying fastest: index = ix * ny + iy.
class EvalGrid {
 public:
  EvalGrid() = default;

  static EvalGrid line(std::vector<double> x);
  static EvalGrid tensor(std::vector<double> x, std::vector<double> y);
  static EvalGrid uniform(double lo, double hi, std::size_t count);
  static EvalGrid uniform2d(std::array<double, 2> lo, std::array<double, 2> hi,
                            std::size_t nx, std::size_t ny);

  int dim() const noexcept { return y_.empty() ? 1 : 2; }
  std::size_t size() const noexcept { return y_.empty() ? x_.size() : x_.size() * y_.size(); }
  const std::vector<double>& axis(int k) const noexcept { return k == 0 ? x_ : y_; }
  std::size_t nx() const noexcept { return x_.size(); }
  std::size_t ny() const noexcept { return y_.empty() ? 1 : y_.size(); }

  std::array<double, 2> point(std::size_t idx) const noexcept;

  //! Smallest gap between neighbouring coordinates along an axis.
  double min_spacing(int k) const noexcept;

 private:
  std::vector<double> x_;
  std::vector<double> y_;
};

std::vector<double> linspace(double lo, double hi, std::size_t count);

}  // namespace debias
