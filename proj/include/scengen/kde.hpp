// Copyright 2026 The scengen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "scengen/common.hpp"

namespace scengen {

/// A probability density discretized on the fixed evaluation grid:
/// 1024 evenly spaced points spanning [-0.05, 1.05], i.e. the normalized
/// power range padded by five default bandwidths on each side.
struct Pdf {
  static constexpr int kGridSize = 1024;
  static constexpr double kGridLo = -0.05;
  static constexpr double kGridHi = 1.05;

  std::vector<double> densities;
  double bandwidth = 0.0;

  static double grid_step() {
    return (kGridHi - kGridLo) / static_cast<double>(kGridSize - 1);
  }
  static double grid_point(int i) { return kGridLo + grid_step() * i; }

  /// Linear interpolation between grid points; clamped at the ends.
  double density_at(double x) const {
    const double pos = (x - kGridLo) / grid_step();
    if (pos <= 0.0) return densities.front();
    if (pos >= kGridSize - 1) return densities.back();
    const int i = static_cast<int>(pos);
    const double frac = pos - i;
    return densities[static_cast<std::size_t>(i)] * (1.0 - frac) +
           densities[static_cast<std::size_t>(i) + 1] * frac;
  }

  double trapezoid_integral() const {
    double s = 0;
    for (int i = 0; i + 1 < kGridSize; ++i)
      s += densities[static_cast<std::size_t>(i)] +
           densities[static_cast<std::size_t>(i) + 1];
    return 0.5 * s * grid_step();
  }
};

/// Gaussian kernel density estimate: density(x) = (1/(n h)) sum phi((x-xi)/h),
/// evaluated on the fixed grid. The default bandwidth 0.01 resolves 1% of the
/// normalized power range.
inline Pdf kde_fit(const std::vector<double>& values, double bandwidth = 0.01) {
  if (values.empty()) throw ConfigError("kde_fit: empty input");
  if (!(bandwidth > 0.0)) throw ConfigError("kde_fit: bandwidth must be > 0");

  Pdf pdf;
  pdf.bandwidth = bandwidth;
  pdf.densities.assign(Pdf::kGridSize, 0.0);
  const double step = Pdf::grid_step();
  const double norm = 1.0 /
                      (static_cast<double>(values.size()) * bandwidth *
                       std::sqrt(2.0 * std::numbers::pi));
  // Kernel contributions beyond 10 bandwidths are below 1e-21 of the peak,
  // far under the 1e-12 density floor used downstream.
  const double cutoff = 10.0 * bandwidth;
  for (double x : values) {
    int j0 = static_cast<int>(std::ceil((x - cutoff - Pdf::kGridLo) / step));
    int j1 = static_cast<int>(std::floor((x + cutoff - Pdf::kGridLo) / step));
    j0 = std::max(j0, 0);
    j1 = std::min(j1, Pdf::kGridSize - 1);
    for (int j = j0; j <= j1; ++j) {
      const double t = (Pdf::grid_point(j) - x) / bandwidth;
      pdf.densities[static_cast<std::size_t>(j)] += norm * std::exp(-0.5 * t * t);
    }
  }
  return pdf;
}

/// Kullback-Leibler divergence D(P||Q) by trapezoidal integration of
/// p log(p/q) over the shared grid, with both densities floored at 1e-12.
/// Kept out of line so every call site shares one code path and
/// symmetric_kld(p,q) == symmetric_kld(q,p) holds bit-exactly.
[[gnu::noinline]] inline double kld(const Pdf& p, const Pdf& q) {
  if (p.densities.size() != q.densities.size() ||
      p.densities.size() != static_cast<std::size_t>(Pdf::kGridSize))
    throw ConfigError("kld: PDFs must share the evaluation grid");
  constexpr double kFloor = 1e-12;
  auto integrand = [&](int i) {
    const double pf = std::max(p.densities[static_cast<std::size_t>(i)], kFloor);
    const double qf = std::max(q.densities[static_cast<std::size_t>(i)], kFloor);
    return pf * std::log(pf / qf);
  };
  double s = 0;
  for (int i = 0; i + 1 < Pdf::kGridSize; ++i)
    s += integrand(i) + integrand(i + 1);
  return 0.5 * s * Pdf::grid_step();
}

/// D(P||Q) + D(Q||P): the symmetric similarity score between distributions.
inline double symmetric_kld(const Pdf& p, const Pdf& q) {
  return kld(p, q) + kld(q, p);
}

}  // namespace scengen
