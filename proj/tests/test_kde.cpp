// Copyright 2026 The scengen Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "scengen/kde.hpp"
#include "scengen/rng.hpp"

using scengen::kde_fit;
using scengen::kld;
using scengen::Pdf;
using scengen::symmetric_kld;

namespace {

// Normal density discretized directly onto the evaluation grid; independent
// of kde_fit.
Pdf gaussian_pdf(double mu, double sigma) {
  Pdf pdf;
  pdf.bandwidth = sigma;
  pdf.densities.resize(Pdf::kGridSize);
  const double norm = 1.0 / (sigma * std::sqrt(2.0 * std::numbers::pi));
  for (int i = 0; i < Pdf::kGridSize; ++i) {
    const double t = (Pdf::grid_point(i) - mu) / sigma;
    pdf.densities[static_cast<std::size_t>(i)] = norm * std::exp(-0.5 * t * t);
  }
  return pdf;
}

// Closed-form KLD between two univariate normals.
double gaussian_kld(double mu1, double s1, double mu2, double s2) {
  return std::log(s2 / s1) +
         (s1 * s1 + (mu1 - mu2) * (mu1 - mu2)) / (2.0 * s2 * s2) - 0.5;
}

}  // namespace

TEST_CASE("kde peak for a single value matches the kernel closed form") {
  Pdf pdf = kde_fit({0.5}, 0.01);
  const double expect = 1.0 / (0.01 * std::sqrt(2.0 * std::numbers::pi));
  REQUIRE(pdf.density_at(0.5) == Catch::Approx(expect).margin(0.1));
}

TEST_CASE("kde integrates to one for assorted inputs") {
  scengen::Rng rng(17);
  std::vector<std::vector<double>> cases = {
      {0.5},
      {0.0, 1.0},
      {0.2, 0.8},
  };
  std::vector<double> random_case(500);
  for (auto& v : random_case) v = rng.uniform();
  cases.push_back(random_case);
  for (const auto& values : cases) {
    Pdf pdf = kde_fit(values, 0.01);
    REQUIRE(pdf.trapezoid_integral() >= 0.99);
    REQUIRE(pdf.trapezoid_integral() <= 1.01);
    for (double d : pdf.densities) REQUIRE(d >= 0.0);
  }
}

TEST_CASE("kde of a symmetric sample is symmetric") {
  Pdf pdf = kde_fit({0.2, 0.8}, 0.01);
  REQUIRE(std::fabs(pdf.density_at(0.2) - pdf.density_at(0.8)) < 1e-9);
}

TEST_CASE("kde rejects empty input and bad bandwidth") {
  REQUIRE_THROWS_AS(kde_fit({}), scengen::ConfigError);
  REQUIRE_THROWS_AS(kde_fit({0.5}, 0.0), scengen::ConfigError);
}

TEST_CASE("kld of a pdf against itself is exactly zero") {
  Pdf pdf = kde_fit({0.1, 0.4, 0.9}, 0.01);
  REQUIRE(kld(pdf, pdf) == 0.0);
  REQUIRE(symmetric_kld(pdf, pdf) == 0.0);
}

TEST_CASE("kld reproduces the Gaussian closed form on the grid") {
  // N(0.3, 0.05^2) vs N(0.3, 0.1^2)
  Pdf p = gaussian_pdf(0.3, 0.05);
  Pdf q = gaussian_pdf(0.3, 0.1);
  const double forward = gaussian_kld(0.3, 0.05, 0.3, 0.1);   // ~0.3181
  const double reverse = gaussian_kld(0.3, 0.1, 0.3, 0.05);   // ~0.8069
  REQUIRE(forward == Catch::Approx(std::log(2.0) + 0.125 - 0.5).epsilon(1e-12));
  REQUIRE(kld(p, q) == Catch::Approx(forward).margin(0.01));
  REQUIRE(kld(q, p) == Catch::Approx(reverse).margin(0.01));
  // asymmetry is real
  REQUIRE(std::fabs(kld(p, q) - kld(q, p)) > 0.1);
  // symmetrized value is the sum of both directions
  REQUIRE(symmetric_kld(p, q) ==
          Catch::Approx(forward + reverse).margin(0.02));
}

TEST_CASE("symmetric_kld is symmetric and non-negative") {
  scengen::Rng rng(23);
  for (int rep = 0; rep < 5; ++rep) {
    std::vector<double> a(200), b(200);
    for (auto& v : a) v = rng.uniform();
    for (auto& v : b) v = rng.uniform() * rng.uniform();  // skewed
    Pdf pa = kde_fit(a, 0.01);
    Pdf pb = kde_fit(b, 0.01);
    const double spq = symmetric_kld(pa, pb);
    const double sqp = symmetric_kld(pb, pa);
    REQUIRE(spq == sqp);
    REQUIRE(spq >= -1e-9);
  }
}

TEST_CASE("kld rejects pdfs from a different grid") {
  Pdf p = kde_fit({0.5}, 0.01);
  Pdf broken = p;
  broken.densities.pop_back();
  REQUIRE_THROWS_AS(kld(p, broken), scengen::ConfigError);
}
