#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace debias {

//! n observations in R^d, d in {1, 2}, stored row-major.
class Sample {
 public:
  Sample() = default;
  Sample(std::vector<double> coords, int dim);

  static Sample from_column(std::vector<double> x) { return Sample(std::move(x), 1); }

  std::size_t size() const noexcept { return dim_ == 0 ? 0 : coords_.size() / dim_; }
  int dim() const noexcept { return dim_; }
  double at(std::size_t i, int k) const noexcept { return coords_[i * dim_ + k]; }
  std::span<const double> point(std::size_t i) const noexcept {
    return {coords_.data() + i * dim_, static_cast<std::size_t>(dim_)};
  }
  std::span<const double> coords() const noexcept { return coords_; }
  std::vector<double> column(int k) const;

 private:
  std::vector<double> coords_;
  int dim_ = 0;
};

//! Covariate-response pairs with a scalar covariate.
class PairedSample {
 public:
  PairedSample() = default;
  PairedSample(std::vector<double> x, std::vector<double> y);

  std::size_t size() const noexcept { return x_.size(); }
  const std::vector<double>& x() const noexcept { return x_; }
  const std::vector<double>& y() const noexcept { return y_; }

 private:
  std::vector<double> x_;
  std::vector<double> y_;
};

}  // namespace debias
