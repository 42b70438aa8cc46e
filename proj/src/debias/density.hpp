#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "debias/grid.hpp"
#include "debias/kernel.hpp"
#include "debias/sample.hpp"

namespace debias {

struct EstimateMeta {
  double h = 0.0;
  std::optional<double> tau;
  KernelSpec kernel;
  bool debiased = false;
  int derivative = 0;
};

struct DensityEstimate {
  EvalGrid grid;
  std::vector<double> values;
  EstimateMeta meta;
};

enum class DensityParts : unsigned { plain = 1, laplacian = 2, both = 3 };

//! Kernel density, Laplacian and debiased density estimates on a fixed grid
//! for a fixed sample, with per-observation multiplicity weights.
//!
//! Kernel factors are tabulated once at construction, so re-evaluating with
//! bootstrap multiplicities costs O(n G) multiply-adds and no kernel calls.
//! Two-dimensional kernels are products, so the tables are per-axis. Every
//! grid value is accumulated over observations in sample order.
class DensityEvaluator {
 public:
  struct Values {
    std::vector<double> plain;      // p_h
    std::vector<double> laplacian;  // Laplacian estimate at b = h / tau
    std::vector<double> debiased;   // p_h - 1/2 c_K h^2 Laplacian
  };

  DensityEvaluator(const Sample& s, const EvalGrid& g, KernelSpec k, double h, double tau,
                   DensityParts parts = DensityParts::both);

  //! weights[i] is the multiplicity of observation i; the original sample
  //! corresponds to all ones. The normalisation uses the sample size n.
  void evaluate(std::span<const double> weights, Values& out) const;
  Values evaluate() const;
  //! `weights` holds `count` consecutive rows of n multiplicities.
  void evaluate_batch(std::span<const double> weights, std::size_t count,
                      std::vector<Values>& out) const;

  std::size_t sample_size() const noexcept { return n_; }
  const EvalGrid& grid() const noexcept { return grid_; }
  double h() const noexcept { return h_; }
  double b() const noexcept { return b_; }
  double ck() const noexcept { return ck_; }

 private:
  bool want(DensityParts p) const noexcept {
    return (static_cast<unsigned>(parts_) & static_cast<unsigned>(p)) != 0;
  }
  const std::vector<double>& b_table(const std::vector<double>& own,
                                     const std::vector<double>& fallback) const noexcept {
    return shared_ ? fallback : own;
  }

  void finish(Values& out) const;

  EvalGrid grid_;
  KernelSpec kernel_;
  std::size_t n_;
  double h_, b_, ck_;
  DensityParts parts_;
  bool shared_;
  // d = 1: n x G tables. d = 2: per-axis n x nx and n x ny tables.
  std::vector<double> kh_x_, kh_y_;
  std::vector<double> kb_x_, kb_y_;
  std::vector<double> d2b_x_, d2b_y_;
};

DensityEstimate kde_eval(const Sample& s, double h, KernelSpec k, const EvalGrid& g);
DensityEstimate kde_laplacian_eval(const Sample& s, double b, KernelSpec k, const EvalGrid& g);
DensityEstimate debiased_kde_eval(const Sample& s, double h, double tau, KernelSpec k,
                                  const EvalGrid& g);

//! Data range widened by 3h on every side; 512 points (d = 1) or 128 per
//! axis (d = 2) unless per_axis is given.
EvalGrid default_density_grid(const Sample& s, double h, std::size_t per_axis = 0);

}  // namespace debias
