#include "debias/sample.hpp"

#include <algorithm>
#include <cmath>

#include "debias/error.hpp"

namespace debias {

Sample::Sample(std::vector<double> coords, int dim) : coords_(std::move(coords)), dim_(dim) {
  if (dim != 1 && dim != 2) fail(ErrorCode::invalid_argument, "sample dimension must be 1 or 2");
  if (coords_.empty() || coords_.size() % dim != 0)
    fail(ErrorCode::invalid_argument, "sample must contain at least one complete point");
  for (double v : coords_)
    if (!std::isfinite(v)) fail(ErrorCode::invalid_argument, "sample values must be finite");
}

std::vector<double> Sample::column(int k) const {
  std::vector<double> out(size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = at(i, k);
  return out;
}

PairedSample::PairedSample(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)) {
  if (x_.size() != y_.size())
    fail(ErrorCode::dimension_mismatch, "covariate and response lengths differ");
  if (x_.size() < 5) fail(ErrorCode::invalid_argument, "paired sample needs at least 5 rows");
  for (std::size_t i = 0; i < x_.size(); ++i)
    if (!std::isfinite(x_[i]) || !std::isfinite(y_[i]))
      fail(ErrorCode::invalid_argument, "paired sample values must be finite");
  std::vector<double> sorted = x_;
  std::sort(sorted.begin(), sorted.end());
  auto distinct = std::unique(sorted.begin(), sorted.end()) - sorted.begin();
  if (distinct < 4)
    fail(ErrorCode::degenerate, "paired sample needs at least 4 distinct covariate values");
}

}  // namespace debias
