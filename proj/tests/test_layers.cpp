// Copyright 2026 The scengen Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "scengen/ops.hpp"
#include "scengen/rng.hpp"

using scengen::ConvSpec;
using scengen::Rng;
using scengen::Tensor;

TEST_CASE("conv2d window sums on the all-ones 4x4 input") {
  // kernel 4, stride 2, padding 1: every window clips one border row/col,
  // leaving a 3x3 patch of ones.
  ConvSpec sp;
  sp.kh = sp.kw = 4;
  sp.sh = sp.sw = 2;
  sp.ph = sp.pw = 1;
  sp.in_channels = sp.out_channels = 1;
  Tensor x = Tensor::full({1, 1, 4, 4}, 1.0);
  Tensor w = Tensor::full({1, 1, 4, 4}, 1.0);
  Tensor b = Tensor::zeros({1});
  Tensor out = scengen::conv2d(x, w, b, sp);
  REQUIRE(out.shape() == std::vector<int>{1, 1, 2, 2});

  auto ref = oracles::conv2d_brute(x.values(), 1, 1, 4, 4, w.values(), 1, 4, 4,
                                   2, 2, 1, 1, b.values());
  for (std::size_t i = 0; i < 4; ++i) {
    REQUIRE(out[i] == ref[i]);
    REQUIRE(out[i] == 9.0);
  }
}

TEST_CASE("conv2d with an identity 1x1 kernel is the identity") {
  ConvSpec sp;
  sp.in_channels = sp.out_channels = 1;
  Tensor x = Tensor::from({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor w = Tensor::full({1, 1, 1, 1}, 1.0);
  Tensor b = Tensor::zeros({1});
  Tensor out = scengen::conv2d(x, w, b, sp);
  REQUIRE(out.shape() == x.shape());
  REQUIRE(out.values() == x.values());
}

TEST_CASE("conv2d output size formula") {
  ConvSpec sp;
  sp.kh = sp.kw = 4;
  sp.sh = sp.sw = 2;
  sp.ph = sp.pw = 1;
  sp.in_channels = sp.out_channels = 1;
  Tensor x = Tensor::zeros({1, 1, 4, 4});
  Tensor w = Tensor::zeros({1, 1, 4, 4});
  Tensor b = Tensor::zeros({1});
  REQUIRE(scengen::conv2d(x, w, b, sp).shape() == std::vector<int>{1, 1, 2, 2});
}

TEST_CASE("conv2d names the offending dimension on mismatch") {
  ConvSpec sp;
  sp.in_channels = 4;
  sp.out_channels = 1;
  Tensor x = Tensor::zeros({1, 3, 4, 4});
  Tensor w = Tensor::zeros({1, 4, 1, 1});
  Tensor b = Tensor::zeros({1});
  REQUIRE_THROWS_WITH(scengen::conv2d(x, w, b, sp),
                      Catch::Matchers::ContainsSubstring("channels"));
}

TEST_CASE("conv_transpose2d output sizes for the generator layer geometries") {
  auto spatial = [](int ih, int iw, int kh, int kw, int sh, int sw, int ph,
                    int pw) {
    ConvSpec sp;
    sp.kh = kh;
    sp.kw = kw;
    sp.sh = sh;
    sp.sw = sw;
    sp.ph = ph;
    sp.pw = pw;
    sp.in_channels = sp.out_channels = 1;
    Tensor x = Tensor::zeros({1, 1, ih, iw});
    Tensor w = Tensor::zeros({1, 1, kh, kw});
    Tensor b = Tensor::zeros({1});
    auto s = scengen::conv_transpose2d(x, w, b, sp).shape();
    return std::pair<int, int>{s[2], s[3]};
  };

  // 1x1 -> 4x3 (kernel (4,3), stride 1, no padding)
  REQUIRE(spatial(1, 1, 4, 3, 1, 1, 0, 0) == std::pair<int, int>{4, 3});
  // 16x12 -> 32x24 (kernel 4, stride 2, padding 1)
  REQUIRE(spatial(16, 12, 4, 4, 2, 2, 1, 1) == std::pair<int, int>{32, 24});
  // 12x12 -> 48x24 (kernel 4, stride (4,2), padding (0,1))
  REQUIRE(spatial(12, 12, 4, 4, 4, 2, 0, 1) == std::pair<int, int>{48, 24});
}

TEST_CASE("conv_transpose2d rejects non-positive output sizes") {
  ConvSpec sp;
  sp.kh = sp.kw = 2;
  sp.sh = sp.sw = 1;
  sp.ph = sp.pw = 2;  // (1-1)*1 - 4 + 2 = -2
  sp.in_channels = sp.out_channels = 1;
  Tensor x = Tensor::zeros({1, 1, 1, 1});
  Tensor w = Tensor::zeros({1, 1, 2, 2});
  Tensor b = Tensor::zeros({1});
  REQUIRE_THROWS_AS(scengen::conv_transpose2d(x, w, b, sp),
                    scengen::ConfigError);
}

namespace {

// Biased per-channel moments over [N,C,H,W], matching the normalization
// statistic batchnorm uses.
std::pair<std::vector<double>, std::vector<double>> channel_moments(
    const Tensor& t) {
  const int N = t.dim(0), C = t.dim(1), H = t.dim(2), W = t.dim(3);
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  std::vector<double> mean(C, 0.0), var(C, 0.0);
  for (int c = 0; c < C; ++c) {
    double s = 0;
    for (int n = 0; n < N; ++n)
      for (std::size_t i = 0; i < plane; ++i)
        s += t[(static_cast<std::size_t>(n) * C + c) * plane + i];
    mean[c] = s / (static_cast<double>(N) * plane);
    double v = 0;
    for (int n = 0; n < N; ++n)
      for (std::size_t i = 0; i < plane; ++i) {
        const double d =
            t[(static_cast<std::size_t>(n) * C + c) * plane + i] - mean[c];
        v += d * d;
      }
    var[c] = v / (static_cast<double>(N) * plane);
  }
  return {mean, var};
}

}  // namespace

TEST_CASE("batchnorm2d normalizes each channel in train mode") {
  Rng rng(100);
  std::vector<double> v(4 * 3 * 5 * 5);
  for (auto& x : v) x = rng.uniform(-3.0, 7.0);
  Tensor x = Tensor::from({4, 3, 5, 5}, v);
  Tensor gamma = Tensor::full({3}, 1.0);
  Tensor beta = Tensor::zeros({3});
  scengen::BatchNorm2dState st;
  Tensor out = scengen::batchnorm2d(x, gamma, beta, st, true);
  auto [mean, var] = channel_moments(out);
  for (int c = 0; c < 3; ++c) {
    REQUIRE(std::fabs(mean[c]) < 1e-5);
    REQUIRE(std::fabs(var[c] - 1.0) < 1e-5);
  }
}

TEST_CASE("batchnorm2d affine transform hits mean beta and std gamma") {
  Rng rng(101);
  std::vector<double> v(8 * 4 * 6 * 6);
  for (auto& x : v) x = rng.normal(2.0, 3.0);
  Tensor x = Tensor::from({8, 4, 6, 6}, v);
  Tensor gamma = Tensor::full({4}, 2.0);
  Tensor beta = Tensor::full({4}, 0.5);
  scengen::BatchNorm2dState st;
  Tensor out = scengen::batchnorm2d(x, gamma, beta, st, true);
  auto [mean, var] = channel_moments(out);
  for (int c = 0; c < 4; ++c) {
    REQUIRE(std::fabs(mean[c] - 0.5) < 1e-4);
    REQUIRE(std::fabs(std::sqrt(var[c]) - 2.0) < 1e-4);
  }
}

TEST_CASE("batchnorm2d maps a constant channel to all zeros") {
  Tensor x = Tensor::full({3, 1, 2, 2}, 5.0);
  Tensor gamma = Tensor::full({1}, 1.0);
  Tensor beta = Tensor::zeros({1});
  scengen::BatchNorm2dState st;
  Tensor out = scengen::batchnorm2d(x, gamma, beta, st, true);
  for (std::size_t i = 0; i < out.numel(); ++i) REQUIRE(out[i] == 0.0);
}

TEST_CASE("batchnorm2d rejects batch size 1 in train mode") {
  Tensor x = Tensor::zeros({1, 2, 3, 3});
  Tensor gamma = Tensor::full({2}, 1.0);
  Tensor beta = Tensor::zeros({2});
  scengen::BatchNorm2dState st;
  REQUIRE_THROWS_AS(scengen::batchnorm2d(x, gamma, beta, st, true),
                    scengen::ConfigError);
  // Eval mode has no such restriction.
  st.init(2);
  REQUIRE_NOTHROW(scengen::batchnorm2d(x, gamma, beta, st, false));
}

TEST_CASE("batchnorm2d updates running statistics by EMA") {
  Tensor x = Tensor::from({2, 1, 1, 2}, {1.0, 3.0, 5.0, 7.0});
  Tensor gamma = Tensor::full({1}, 1.0);
  Tensor beta = Tensor::zeros({1});
  scengen::BatchNorm2dState st;
  scengen::batchnorm2d(x, gamma, beta, st, true);
  // batch mean 4, biased var 5, unbiased var 20/3
  REQUIRE(st.running_mean[0] == Catch::Approx(0.9 * 0.0 + 0.1 * 4.0));
  REQUIRE(st.running_var[0] == Catch::Approx(0.9 * 1.0 + 0.1 * (20.0 / 3.0)));
}

TEST_CASE("leaky_relu evaluates the piecewise map") {
  Tensor x = Tensor::from({3}, {-1.0, 0.0, 2.0});
  Tensor out = scengen::leaky_relu(x, 0.2);
  REQUIRE(out.values() == std::vector<double>{-0.2, 0.0, 2.0});

  Tensor pos = Tensor::from({3}, {0.5, 1.0, 9.0});
  REQUIRE(scengen::leaky_relu(pos, 0.2).values() == pos.values());

  Tensor probe = Tensor::from({1}, {-3.0}, true);
  scengen::sum_all(scengen::leaky_relu(probe, 0.2)).backward();
  REQUIRE(probe.grad()[0] == 0.2);

  REQUIRE_THROWS_AS(scengen::leaky_relu(x, 1.5), scengen::ConfigError);
}

TEST_CASE("sigmoid closed-form values and saturation") {
  REQUIRE(scengen::sigmoid(Tensor::scalar(0.0)).item() == 0.5);
  const double ln3 = std::log(3.0);
  REQUIRE(scengen::sigmoid(Tensor::scalar(ln3)).item() ==
          Catch::Approx(0.75).epsilon(1e-12));
  const double lo = scengen::sigmoid(Tensor::scalar(-1000.0)).item();
  REQUIRE(std::isfinite(lo));
  REQUIRE(lo >= 0.0);
  REQUIRE(lo <= 1e-300);
  const double hi = scengen::sigmoid(Tensor::scalar(1000.0)).item();
  REQUIRE(std::isfinite(hi));
  REQUIRE(hi <= 1.0);
}

TEST_CASE("bce_loss closed forms") {
  // perfect prediction: only the clamp keeps the loss nonzero
  Tensor p = Tensor::from({2}, {1.0, 0.0});
  Tensor y = Tensor::from({2}, {1.0, 0.0});
  REQUIRE(scengen::bce_loss(p, y).item() <= 1.1e-7);

  Tensor half = Tensor::from({2}, {0.5, 0.5});
  REQUIRE(scengen::bce_loss(half, y).item() ==
          Catch::Approx(std::log(2.0)).epsilon(1e-12));

  Tensor p9 = Tensor::scalar(0.9);
  Tensor y0 = Tensor::scalar(0.0);
  REQUIRE(scengen::bce_loss(p9, y0).item() ==
          Catch::Approx(-std::log(0.1)).epsilon(1e-12));

  REQUIRE(scengen::bce_loss(p9, y0).item() >= 0.0);
  REQUIRE_THROWS_AS(scengen::bce_loss(p9, Tensor::scalar(0.5)),
                    scengen::ConfigError);
}
