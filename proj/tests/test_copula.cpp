// Copyright 2026 The scengen Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <vector>

#include "scengen/copula.hpp"
#include "scengen/rng.hpp"

using scengen::CopulaModel;
using scengen::ScenarioDataset;
using scengen::Terrain;

namespace {

// Samples from a known bivariate Gaussian copula with uniform marginals,
// using the hand Cholesky formula (independent of the library's eigen-based
// sampling path).
ScenarioDataset bivariate_copula_data(double rho, std::size_t n,
                                      std::uint64_t seed) {
  ScenarioDataset ds;
  ds.farms = {{"a", Terrain::kFlatland, 1.0}, {"b", Terrain::kFlatland, 1.0}};
  ds.horizon = 1;
  ds.resolution_hours = 24.0;
  scengen::Rng rng(seed);
  auto cdf = [](double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); };
  for (std::size_t s = 0; s < n; ++s) {
    const double z1 = rng.normal();
    const double z2 = rho * z1 + std::sqrt(1.0 - rho * rho) * rng.normal();
    ds.samples.push_back({cdf(z1), cdf(z2)});
  }
  return ds;
}

ScenarioDataset independent_data(int dims_parks, std::size_t n,
                                 std::uint64_t seed) {
  ScenarioDataset ds;
  for (int p = 0; p < dims_parks; ++p)
    ds.farms.push_back({"p" + std::to_string(p), Terrain::kFlatland, 1.0});
  ds.horizon = 1;
  ds.resolution_hours = 24.0;
  scengen::Rng rng(seed);
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<double> sample(static_cast<std::size_t>(dims_parks));
    for (auto& v : sample) v = rng.uniform();
    ds.samples.push_back(std::move(sample));
  }
  return ds;
}

double min_eigenvalue(const CopulaModel& m) {
  Eigen::Map<const Eigen::MatrixXd> corr(m.correlation.data(), m.dims, m.dims);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr);
  return eig.eigenvalues().minCoeff();
}

// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j]) ++i;
    else ++j;
    const double fa = static_cast<double>(i) / static_cast<double>(a.size());
    const double fb = static_cast<double>(j) / static_cast<double>(b.size());
    d = std::max(d, std::fabs(fa - fb));
  }
  return d;
}

}  // namespace

TEST_CASE("copula_fit recovers a bivariate Gaussian dependence of 0.8") {
  auto ds = bivariate_copula_data(0.8, 2000, 42);
  auto model = scengen::copula_fit(ds);
  REQUIRE(model.dims == 2);
  REQUIRE(model.corr_at(0, 1) == Catch::Approx(0.8).margin(0.05));
}

TEST_CASE("copula_fit on independent data keeps correlations near zero") {
  auto model = scengen::copula_fit(independent_data(4, 2000, 7));
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (i != j) REQUIRE(std::fabs(model.corr_at(i, j)) < 0.06);
}

TEST_CASE("fitted correlation has exact unit diagonal and is PSD") {
  auto ds = bivariate_copula_data(0.95, 500, 3);
  auto model = scengen::copula_fit(ds);
  for (int i = 0; i < model.dims; ++i) REQUIRE(model.corr_at(i, i) == 1.0);
  REQUIRE(min_eigenvalue(model) >= -1e-10);
  for (int i = 0; i < model.dims; ++i)
    for (int j = 0; j < model.dims; ++j)
      REQUIRE(model.corr_at(i, j) == model.corr_at(j, i));
}

TEST_CASE("constant dimensions get zero correlation and a warning entry") {
  auto ds = independent_data(3, 100, 5);
  for (auto& s : ds.samples) s[1] = 0.5;
  auto model = scengen::copula_fit(ds);
  REQUIRE(model.constant_dims == std::vector<int>{1});
  REQUIRE(model.corr_at(0, 1) == 0.0);
  REQUIRE(model.corr_at(1, 2) == 0.0);
  REQUIRE(model.corr_at(1, 1) == 1.0);
}

TEST_CASE("copula_fit requires at least 10 samples") {
  REQUIRE_THROWS_AS(scengen::copula_fit(independent_data(2, 5, 1)),
                    scengen::ConfigError);
}

TEST_CASE("sampling a model fitted on constant data returns that constant") {
  ScenarioDataset ds;
  ds.farms = {{"a", Terrain::kFlatland, 1.0}};
  ds.horizon = 2;
  ds.resolution_hours = 12.0;
  for (int s = 0; s < 20; ++s) ds.samples.push_back({0.5, 0.5});
  auto model = scengen::copula_fit(ds);
  auto out = scengen::copula_sample(model, 50, 9);
  for (const auto& s : out.samples)
    for (double v : s) REQUIRE(v == 0.5);
}

TEST_CASE("identity correlation produces empirically uncorrelated samples") {
  auto model = scengen::copula_fit(independent_data(3, 2000, 11));
  auto out = scengen::copula_sample(model, 2000, 13);
  for (int a = 0; a < 3; ++a)
    for (int b = a + 1; b < 3; ++b) {
      std::vector<double> va, vb;
      for (const auto& s : out.samples) {
        va.push_back(s[static_cast<std::size_t>(a)]);
        vb.push_back(s[static_cast<std::size_t>(b)]);
      }
      double ma = 0, mb = 0;
      for (std::size_t i = 0; i < va.size(); ++i) {
        ma += va[i];
        mb += vb[i];
      }
      ma /= static_cast<double>(va.size());
      mb /= static_cast<double>(vb.size());
      double cab = 0, caa = 0, cbb = 0;
      for (std::size_t i = 0; i < va.size(); ++i) {
        cab += (va[i] - ma) * (vb[i] - mb);
        caa += (va[i] - ma) * (va[i] - ma);
        cbb += (vb[i] - mb) * (vb[i] - mb);
      }
      REQUIRE(std::fabs(cab / std::sqrt(caa * cbb)) < 0.06);
    }
}

TEST_CASE("sampled marginals match the fitted marginals (KS < 0.05)") {
  auto ds = bivariate_copula_data(0.6, 2000, 21);
  auto model = scengen::copula_fit(ds);
  auto out = scengen::copula_sample(model, 2000, 22);
  for (int d = 0; d < model.dims; ++d) {
    std::vector<double> sampled;
    for (const auto& s : out.samples)
      sampled.push_back(s[static_cast<std::size_t>(d)]);
    REQUIRE(ks_statistic(sampled, model.marginals[static_cast<std::size_t>(d)]) <
            0.05);
  }
}

TEST_CASE("refit on own samples reproduces the correlation matrix") {
  // 2 farms x 3 steps = 6 dims with a block dependence structure
  ScenarioDataset ds;
  ds.farms = {{"a", Terrain::kFlatland, 1.0}, {"b", Terrain::kForest, 1.0}};
  ds.horizon = 3;
  ds.resolution_hours = 8.0;
  scengen::Rng rng(31);
  for (int s = 0; s < 2000; ++s) {
    const double shared = rng.normal();
    std::vector<double> sample(6);
    for (int d = 0; d < 6; ++d) {
      const double z = 0.7 * shared + std::sqrt(1.0 - 0.49) * rng.normal();
      sample[static_cast<std::size_t>(d)] =
          0.5 * std::erfc(-z / std::numbers::sqrt2);
    }
    ds.samples.push_back(std::move(sample));
  }
  auto model = scengen::copula_fit(ds);
  auto regen = scengen::copula_sample(model, 2000, 33);
  auto refit = scengen::copula_fit(regen);
  double frob = 0;
  for (std::size_t i = 0; i < model.correlation.size(); ++i) {
    const double d = model.correlation[i] - refit.correlation[i];
    frob += d * d;
  }
  REQUIRE(std::sqrt(frob) < 0.1 * model.dims);
}

TEST_CASE("copula sampling is deterministic per seed and validates n") {
  auto model = scengen::copula_fit(independent_data(2, 100, 41));
  auto a = scengen::copula_sample(model, 20, 5);
  auto b = scengen::copula_sample(model, 20, 5);
  REQUIRE(a.samples == b.samples);
  REQUIRE_THROWS_AS(scengen::copula_sample(model, 0, 5), scengen::ConfigError);
}

TEST_CASE("copula model file round-trips") {
  auto ds = bivariate_copula_data(0.4, 200, 51);
  auto model = scengen::copula_fit(ds);
  const auto path =
      (std::filesystem::temp_directory_path() / "scengen_copula_model.txt")
          .string();
  scengen::copula_save(model, path);
  auto back = scengen::copula_load(path);
  REQUIRE(back.dims == model.dims);
  REQUIRE(back.horizon == model.horizon);
  REQUIRE(back.farms.size() == model.farms.size());
  for (std::size_t i = 0; i < model.correlation.size(); ++i)
    REQUIRE(back.correlation[i] ==
            Catch::Approx(model.correlation[i]).margin(1e-12));
  for (int d = 0; d < model.dims; ++d)
    REQUIRE(back.marginals[static_cast<std::size_t>(d)] ==
            model.marginals[static_cast<std::size_t>(d)]);

  // corrupt file -> artifact error
  {
    std::ofstream bad(path, std::ios::trunc);
    bad << "scengen-copula v1\nparks nonsense\n";
  }
  REQUIRE_THROWS_AS(scengen::copula_load(path), scengen::CorruptArtifactError);
}
