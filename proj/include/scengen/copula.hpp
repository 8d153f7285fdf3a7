// Copyright 2026 The scengen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "scengen/common.hpp"
#include "scengen/dataset.hpp"
#include "scengen/gemm.hpp"
#include "scengen/rng.hpp"

namespace scengen {

/// Gaussian copula over the flattened P*H dimensions of day samples:
/// per-dimension empirical marginals plus one correlation matrix.
struct CopulaModel {
  std::vector<FarmMeta> farms;
  int horizon = 0;
  double resolution_hours = 1.0;
  int dims = 0;  // parks * horizon

  /// Sorted observed values per dimension (the empirical marginal).
  std::vector<std::vector<double>> marginals;
  /// dims x dims row-major, symmetric, unit diagonal, PSD.
  std::vector<double> correlation;
  /// Dimensions whose observations were constant; their correlations are 0.
  std::vector<int> constant_dims;

  double corr_at(int i, int j) const {
    return correlation[static_cast<std::size_t>(i) * dims + j];
  }

  /// Inverse empirical CDF with linear interpolation between order
  /// statistics; quantiles outside [0,1] clamp to the observed range.
  double marginal_inverse(int dim, double u) const {
    const auto& v = marginals[static_cast<std::size_t>(dim)];
    if (v.size() == 1) return v[0];
    const double pos =
        std::clamp(u, 0.0, 1.0) * static_cast<double>(v.size() - 1);
    const std::size_t i =
        std::min(static_cast<std::size_t>(pos), v.size() - 2);
    const double frac = pos - static_cast<double>(i);
    return v[i] * (1.0 - frac) + v[i + 1] * frac;
  }
};

namespace detail {

// Average ranks (ties share the mean rank), scaled to zero mean afterwards.
inline std::vector<double> average_ranks(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j));
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

inline double std_normal_cdf(double z) {
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

}  // namespace detail

/// Fits marginals and the dependence structure: pairwise Spearman rank
/// correlations mapped to Gaussian correlations by rho = 2 sin(pi rs / 6),
/// then repaired to the nearest unit-diagonal PSD matrix by eigenvalue
/// clipping.
inline CopulaModel copula_fit(const ScenarioDataset& ds) {
  ds.validate();
  if (ds.size() < 10)
    throw ConfigError("copula_fit requires at least 10 samples, got " +
                      std::to_string(ds.size()));
  CopulaModel model;
  model.farms = ds.farms;
  model.horizon = ds.horizon;
  model.resolution_hours = ds.resolution_hours;
  const int D = ds.parks() * ds.horizon;
  model.dims = D;
  const std::size_t n = ds.size();

  // Centered, norm-scaled rank columns; a constant dimension scales to zero.
  std::vector<double> z(n * static_cast<std::size_t>(D));
  model.marginals.resize(static_cast<std::size_t>(D));
  std::vector<double> column(n);
  for (int d = 0; d < D; ++d) {
    for (std::size_t s = 0; s < n; ++s) column[s] = ds.samples[s][static_cast<std::size_t>(d)];
    auto& marg = model.marginals[static_cast<std::size_t>(d)];
    marg = column;
    std::sort(marg.begin(), marg.end());

    std::vector<double> ranks = detail::average_ranks(column);
    double mean = 0;
    for (double r : ranks) mean += r;
    mean /= static_cast<double>(n);
    double norm = 0;
    for (double r : ranks) norm += (r - mean) * (r - mean);
    if (norm == 0.0) {
      model.constant_dims.push_back(d);
      for (std::size_t s = 0; s < n; ++s) z[s * D + static_cast<std::size_t>(d)] = 0.0;
    } else {
      const double inv = 1.0 / std::sqrt(norm);
      for (std::size_t s = 0; s < n; ++s)
        z[s * D + static_cast<std::size_t>(d)] = (ranks[s] - mean) * inv;
    }
  }

  // Spearman matrix = Z^T Z over the scaled rank columns.
  std::vector<double> zt(z.size());
  detail::transpose(z.data(), zt.data(), static_cast<int>(n), D);
  std::vector<double> spearman(static_cast<std::size_t>(D) * D, 0.0);
  detail::gemm_nn(zt.data(), z.data(), spearman.data(), D, static_cast<int>(n),
                  D);

  model.correlation.assign(static_cast<std::size_t>(D) * D, 0.0);
  for (int i = 0; i < D; ++i) {
    model.correlation[static_cast<std::size_t>(i) * D + i] = 1.0;
    for (int j = i + 1; j < D; ++j) {
      const double rs =
          std::clamp(spearman[static_cast<std::size_t>(i) * D + j], -1.0, 1.0);
      const double rho = 2.0 * std::sin(std::numbers::pi * rs / 6.0);
      model.correlation[static_cast<std::size_t>(i) * D + j] = rho;
      model.correlation[static_cast<std::size_t>(j) * D + i] = rho;
    }
  }

  // PSD repair: clip negative eigenvalues, rebuild, rescale to unit diagonal.
  Eigen::Map<Eigen::MatrixXd> corr(model.correlation.data(), D, D);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr);
  if (eig.info() != Eigen::Success)
    throw NumericError("copula_fit: eigendecomposition failed");
  if (eig.eigenvalues().minCoeff() < 0.0) {
    Eigen::VectorXd lambda = eig.eigenvalues().cwiseMax(0.0);
    Eigen::MatrixXd repaired =
        eig.eigenvectors() * lambda.asDiagonal() * eig.eigenvectors().transpose();
    Eigen::VectorXd scale = repaired.diagonal().cwiseSqrt().cwiseInverse();
    repaired = scale.asDiagonal() * repaired * scale.asDiagonal();
    repaired = 0.5 * (repaired + repaired.transpose()).eval();
    repaired.diagonal().setOnes();
    corr = repaired;
  }
  return model;
}

/// Draws n day samples: correlated Gaussians via the symmetric PSD square
/// root, mapped through the normal CDF to uniforms, then through the inverse
/// empirical marginals.
inline ScenarioDataset copula_sample(const CopulaModel& model, std::size_t n,
                                     std::uint64_t seed) {
  if (n == 0) throw ConfigError("copula_sample: n must be positive");
  if (model.dims <= 0 || model.marginals.empty())
    throw ConfigError("copula_sample: model is not fitted");
  const int D = model.dims;

  Eigen::Map<const Eigen::MatrixXd> corr(model.correlation.data(), D, D);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr);
  if (eig.info() != Eigen::Success)
    throw NumericError("copula_sample: eigendecomposition failed");
  // Clipping at zero absorbs roundoff-scale negatives from the repair.
  Eigen::MatrixXd factor =
      eig.eigenvectors() *
      eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();

  ScenarioDataset out;
  out.farms = model.farms;
  out.horizon = model.horizon;
  out.resolution_hours = model.resolution_hours;
  Rng rng(seed);
  Eigen::VectorXd eps(D);
  for (std::size_t s = 0; s < n; ++s) {
    for (int d = 0; d < D; ++d) eps[d] = rng.normal();
    Eigen::VectorXd g = factor * eps;
    std::vector<double> sample(static_cast<std::size_t>(D));
    for (int d = 0; d < D; ++d)
      sample[static_cast<std::size_t>(d)] =
          model.marginal_inverse(d, detail::std_normal_cdf(g[d]));
    out.samples.push_back(std::move(sample));
  }
  out.validate();
  return out;
}

/// Plain-text model file; doubles are stored with enough digits to
/// round-trip bit-exactly.
inline void copula_save(const CopulaModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "scengen-copula v1\n";
  out << "parks " << model.farms.size() << " horizon " << model.horizon
      << " resolution " << detail::format_double(model.resolution_hours)
      << " dims " << model.dims << '\n';
  for (const auto& f : model.farms)
    out << "farm " << f.farm_id << ' ' << terrain_name(f.terrain) << ' '
        << detail::format_double(f.max_power) << '\n';
  out << "constant";
  for (int d : model.constant_dims) out << ' ' << d;
  out << '\n';
  for (const auto& marg : model.marginals) {
    out << "marginal " << marg.size();
    for (double v : marg) out << ' ' << detail::format_double(v);
    out << '\n';
  }
  out << "correlation\n";
  for (int i = 0; i < model.dims; ++i) {
    for (int j = 0; j < model.dims; ++j)
      out << detail::format_double(model.corr_at(i, j))
          << (j + 1 < model.dims ? " " : "");
    out << '\n';
  }
}

inline CopulaModel copula_load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string tag, version;
  if (!(in >> tag >> version) || tag != "scengen-copula" || version != "v1")
    throw CorruptArtifactError(path + ": not a copula model file");
  CopulaModel model;
  std::string key;
  std::size_t parks = 0;
  if (!(in >> key >> parks) || key != "parks")
    throw CorruptArtifactError(path + ": malformed header");
  if (!(in >> key >> model.horizon) || key != "horizon")
    throw CorruptArtifactError(path + ": malformed header");
  if (!(in >> key >> model.resolution_hours) || key != "resolution")
    throw CorruptArtifactError(path + ": malformed header");
  if (!(in >> key >> model.dims) || key != "dims")
    throw CorruptArtifactError(path + ": malformed header");
  for (std::size_t p = 0; p < parks; ++p) {
    FarmMeta f;
    std::string terrain;
    if (!(in >> key >> f.farm_id >> terrain >> f.max_power) || key != "farm")
      throw CorruptArtifactError(path + ": malformed farm entry");
    f.terrain = terrain_from_name(terrain);
    model.farms.push_back(std::move(f));
  }
  if (!(in >> key) || key != "constant")
    throw CorruptArtifactError(path + ": missing constant-dims line");
  {
    std::string rest;
    std::getline(in, rest);
    std::istringstream is(rest);
    int d;
    while (is >> d) model.constant_dims.push_back(d);
  }
  model.marginals.resize(static_cast<std::size_t>(model.dims));
  for (int d = 0; d < model.dims; ++d) {
    std::size_t count = 0;
    if (!(in >> key >> count) || key != "marginal")
      throw CorruptArtifactError(path + ": malformed marginal " +
                                 std::to_string(d));
    auto& marg = model.marginals[static_cast<std::size_t>(d)];
    marg.resize(count);
    for (auto& v : marg)
      if (!(in >> v))
        throw CorruptArtifactError(path + ": truncated marginal " +
                                   std::to_string(d));
  }
  if (!(in >> key) || key != "correlation")
    throw CorruptArtifactError(path + ": missing correlation block");
  model.correlation.resize(static_cast<std::size_t>(model.dims) * model.dims);
  for (auto& v : model.correlation)
    if (!(in >> v))
      throw CorruptArtifactError(path + ": truncated correlation matrix");
  if (static_cast<int>(model.farms.size()) * model.horizon != model.dims)
    throw CorruptArtifactError(path + ": dims inconsistent with parks*horizon");
  return model;
}

}  // namespace scengen
