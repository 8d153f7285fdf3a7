// Copyright 2026 The scengen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "scengen/common.hpp"
#include "scengen/gemm.hpp"
#include "scengen/tensor.hpp"

namespace scengen {

/// Geometry of one (transposed) convolution layer.
struct ConvSpec {
  int kh = 1, kw = 1;
  int sh = 1, sw = 1;
  int ph = 0, pw = 0;
  int in_channels = 1;
  int out_channels = 1;
};

/// Spatial size of a forward convolution: floor((i + 2p - k)/s) + 1.
inline int conv_out_size(int in, int k, int s, int p) {
  return (in + 2 * p - k) / s + 1;
}

/// Spatial size of a transposed convolution: (i - 1)s - 2p + k.
inline int conv_transpose_out_size(int in, int k, int s, int p) {
  return (in - 1) * s - 2 * p + k;
}

namespace detail {

// Lowers one sample [C,H,W] into a patch matrix with row (c,ki,kj) and
// column (oi,oj): src[c, oi*sh-ph+ki, oj*sw-pw+kj], zero outside the image.
// `row_stride`/`col_offset` let callers pack a whole batch into one wide
// matrix (columns n*colHW .. (n+1)*colHW per sample) so the convolution
// becomes a single large GEMM.
inline void im2col(const double* src, int C, int H, int W, const ConvSpec& sp,
                   int colH, int colW, double* dst, std::size_t row_stride,
                   std::size_t col_offset) {
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  std::size_t r = 0;
  for (int c = 0; c < C; ++c) {
    for (int ki = 0; ki < sp.kh; ++ki) {
      for (int kj = 0; kj < sp.kw; ++kj, ++r) {
        double* out = dst + r * row_stride + col_offset;
        for (int oi = 0; oi < colH; ++oi) {
          const int ii = oi * sp.sh - sp.ph + ki;
          if (ii < 0 || ii >= H) {
            for (int oj = 0; oj < colW; ++oj) *out++ = 0.0;
            continue;
          }
          const double* row = src + c * plane + static_cast<std::size_t>(ii) * W;
          int jj = -sp.pw + kj;
          for (int oj = 0; oj < colW; ++oj, jj += sp.sw)
            *out++ = (jj >= 0 && jj < W) ? row[jj] : 0.0;
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds the patch matrix back into [C,dstH,dstW].
// Entries that land in the padding ring are dropped.
inline void col2im_add(const double* col, int C, int colH, int colW,
                       const ConvSpec& sp, int dstH, int dstW, double* dst,
                       std::size_t row_stride, std::size_t col_offset) {
  const std::size_t plane = static_cast<std::size_t>(dstH) * dstW;
  std::size_t r = 0;
  for (int c = 0; c < C; ++c) {
    for (int ki = 0; ki < sp.kh; ++ki) {
      for (int kj = 0; kj < sp.kw; ++kj, ++r) {
        const double* in = col + r * row_stride + col_offset;
        for (int oi = 0; oi < colH; ++oi) {
          const int ii = oi * sp.sh - sp.ph + ki;
          if (ii < 0 || ii >= dstH) {
            in += colW;
            continue;
          }
          double* row = dst + c * plane + static_cast<std::size_t>(ii) * dstW;
          int jj = -sp.pw + kj;
          for (int oj = 0; oj < colW; ++oj, jj += sp.sw) {
            if (jj >= 0 && jj < dstW) row[jj] += *in;
            ++in;
          }
        }
      }
    }
  }
}

// [N, C, S] -> [C, N*S] (sample-major columns per channel row).
inline void gather_channel_major(const double* src, int N, int C,
                                 std::size_t S, double* dst) {
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const double* from = src + (static_cast<std::size_t>(n) * C + c) * S;
      double* to = dst + c * static_cast<std::size_t>(N) * S + n * S;
      for (std::size_t i = 0; i < S; ++i) to[i] = from[i];
    }
}

// [C, N*S] -> [N, C, S]; either overwrites or accumulates.
inline void scatter_sample_major(const double* src, int N, int C,
                                 std::size_t S, double* dst, bool accumulate) {
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const double* from = src + c * static_cast<std::size_t>(N) * S + n * S;
      double* to = dst + (static_cast<std::size_t>(n) * C + c) * S;
      if (accumulate)
        for (std::size_t i = 0; i < S; ++i) to[i] += from[i];
      else
        for (std::size_t i = 0; i < S; ++i) to[i] = from[i];
    }
}

inline void check_4d(const Tensor& t, const char* op, const char* name) {
  if (t.shape().size() != 4)
    throw ConfigError(std::string(op) + ": " + name + " must be 4-D, got " +
                      shape_str(t.shape()));
}

inline void check_conv_channels(const char* op, const Tensor& x,
                                const Tensor& w, const Tensor& b,
                                const ConvSpec& sp, int w_in_dim,
                                int w_out_dim) {
  if (x.dim(1) != sp.in_channels)
    throw ConfigError(std::string(op) + ": input has " +
                      std::to_string(x.dim(1)) + " channels, spec expects " +
                      std::to_string(sp.in_channels));
  if (w.dim(w_in_dim) != sp.in_channels || w.dim(w_out_dim) != sp.out_channels)
    throw ConfigError(std::string(op) + ": weight shape " +
                      shape_str(w.shape()) + " does not match spec channels " +
                      std::to_string(sp.in_channels) + "->" +
                      std::to_string(sp.out_channels));
  if (w.dim(2) != sp.kh || w.dim(3) != sp.kw)
    throw ConfigError(std::string(op) + ": weight kernel " +
                      std::to_string(w.dim(2)) + "x" + std::to_string(w.dim(3)) +
                      " does not match spec kernel " + std::to_string(sp.kh) +
                      "x" + std::to_string(sp.kw));
  if (static_cast<int>(b.numel()) != sp.out_channels)
    throw ConfigError(std::string(op) + ": bias has " +
                      std::to_string(b.numel()) + " entries, expected " +
                      std::to_string(sp.out_channels));
}

}  // namespace detail

/// 2-D convolution, NCHW layout, weight [out_channels, in_channels, kh, kw].
inline Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b,
                     const ConvSpec& sp) {
  detail::check_4d(x, "conv2d", "input");
  detail::check_4d(w, "conv2d", "weight");
  detail::check_conv_channels("conv2d", x, w, b, sp, /*in=*/1, /*out=*/0);
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int OC = sp.out_channels;
  const int OH = conv_out_size(H, sp.kh, sp.sh, sp.ph);
  const int OW = conv_out_size(W, sp.kw, sp.sw, sp.pw);
  if (OH < 1)
    throw ConfigError("conv2d: output height (i+2p-k)/s+1 = " +
                      std::to_string(OH) + " for input height " +
                      std::to_string(H) + " is not positive");
  if (OW < 1)
    throw ConfigError("conv2d: output width (i+2p-k)/s+1 = " +
                      std::to_string(OW) + " for input width " +
                      std::to_string(W) + " is not positive");

  const int CK = C * sp.kh * sp.kw;
  const std::size_t ohow = static_cast<std::size_t>(OH) * OW;
  const std::size_t wide = static_cast<std::size_t>(N) * ohow;

  // One batched lowering + one GEMM; out_b is [OC, N*ohow].
  std::vector<double> col_b(static_cast<std::size_t>(CK) * wide);
  for (int n = 0; n < N; ++n)
    detail::im2col(x.data() + static_cast<std::size_t>(n) * C * H * W, C, H, W,
                   sp, OH, OW, col_b.data(), wide, static_cast<std::size_t>(n) * ohow);
  std::vector<double> out_b(static_cast<std::size_t>(OC) * wide, 0.0);
  detail::gemm_nn(w.data(), col_b.data(), out_b.data(), OC, CK,
                  static_cast<int>(wide));

  std::vector<double> out(static_cast<std::size_t>(N) * OC * ohow);
  detail::scatter_sample_major(out_b.data(), N, OC, ohow, out.data(), false);
  for (int n = 0; n < N; ++n)
    for (int oc = 0; oc < OC; ++oc) {
      const double bias = b[static_cast<std::size_t>(oc)];
      double* p = out.data() + (static_cast<std::size_t>(n) * OC + oc) * ohow;
      for (std::size_t i = 0; i < ohow; ++i) p[i] += bias;
    }

  return detail::make_result(
      {N, OC, OH, OW}, std::move(out), {x, w, b},
      [x, w, b, sp, N, C, H, W, OC, OH, OW, CK](detail::Node* res) {
        res->backprop = [=]() {
          const std::size_t ohow = static_cast<std::size_t>(OH) * OW;
          const std::size_t wide = static_cast<std::size_t>(N) * ohow;
          const std::vector<double>& gout = res->grad;
          if (b.node()->requires_grad) {
            double* db = b.node()->grad.data();
            for (int n = 0; n < N; ++n)
              for (int oc = 0; oc < OC; ++oc) {
                const double* g =
                    gout.data() + (static_cast<std::size_t>(n) * OC + oc) * ohow;
                double s = 0;
                for (std::size_t i = 0; i < ohow; ++i) s += g[i];
                db[oc] += s;
              }
          }
          if (!w.node()->requires_grad && !x.node()->requires_grad) return;

          std::vector<double> gout_b(static_cast<std::size_t>(OC) * wide);
          detail::gather_channel_major(gout.data(), N, OC, ohow, gout_b.data());
          if (w.node()->requires_grad) {
            std::vector<double> col_b(static_cast<std::size_t>(CK) * wide);
            for (int n = 0; n < N; ++n)
              detail::im2col(x.data() + static_cast<std::size_t>(n) * C * H * W,
                             C, H, W, sp, OH, OW, col_b.data(), wide,
                             static_cast<std::size_t>(n) * ohow);
            detail::gemm_nt(gout_b.data(), col_b.data(), w.node()->grad.data(),
                            OC, static_cast<int>(wide), CK);
          }
          if (x.node()->requires_grad) {
            std::vector<double> wt(static_cast<std::size_t>(CK) * OC);
            detail::transpose(w.data(), wt.data(), OC, CK);
            std::vector<double> dcol_b(static_cast<std::size_t>(CK) * wide, 0.0);
            detail::gemm_nn(wt.data(), gout_b.data(), dcol_b.data(), CK, OC,
                            static_cast<int>(wide));
            for (int n = 0; n < N; ++n)
              detail::col2im_add(
                  dcol_b.data(), C, OH, OW, sp, H, W,
                  x.node()->grad.data() + static_cast<std::size_t>(n) * C * H * W,
                  wide, static_cast<std::size_t>(n) * ohow);
          }
        };
      });
}

/// 2-D transposed convolution, weight [in_channels, out_channels, kh, kw].
/// Output spatial size per axis is (i-1)*s - 2p + k.
inline Tensor conv_transpose2d(const Tensor& x, const Tensor& w,
                               const Tensor& b, const ConvSpec& sp) {
  detail::check_4d(x, "conv_transpose2d", "input");
  detail::check_4d(w, "conv_transpose2d", "weight");
  detail::check_conv_channels("conv_transpose2d", x, w, b, sp, /*in=*/0,
                              /*out=*/1);
  const int N = x.dim(0), IC = x.dim(1), IH = x.dim(2), IW = x.dim(3);
  const int OC = sp.out_channels;
  const int OH = conv_transpose_out_size(IH, sp.kh, sp.sh, sp.ph);
  const int OW = conv_transpose_out_size(IW, sp.kw, sp.sw, sp.pw);
  if (OH < 1)
    throw ConfigError("conv_transpose2d: output height (i-1)s-2p+k = " +
                      std::to_string(OH) + " for input height " +
                      std::to_string(IH) + " is not positive");
  if (OW < 1)
    throw ConfigError("conv_transpose2d: output width (i-1)s-2p+k = " +
                      std::to_string(OW) + " for input width " +
                      std::to_string(IW) + " is not positive");

  const int OCK = OC * sp.kh * sp.kw;
  const std::size_t ihiw = static_cast<std::size_t>(IH) * IW;
  const std::size_t ohow = static_cast<std::size_t>(OH) * OW;
  const std::size_t wide = static_cast<std::size_t>(N) * ihiw;

  // w viewed as [IC, OC*kh*kw]; transposed once for the whole batch.
  std::vector<double> mt(static_cast<std::size_t>(OCK) * IC);
  detail::transpose(w.data(), mt.data(), IC, OCK);

  std::vector<double> x_b(static_cast<std::size_t>(IC) * wide);
  detail::gather_channel_major(x.data(), N, IC, ihiw, x_b.data());
  std::vector<double> colt_b(static_cast<std::size_t>(OCK) * wide, 0.0);
  detail::gemm_nn(mt.data(), x_b.data(), colt_b.data(), OCK, IC,
                  static_cast<int>(wide));

  std::vector<double> out(static_cast<std::size_t>(N) * OC * ohow, 0.0);
  for (int n = 0; n < N; ++n)
    detail::col2im_add(colt_b.data(), OC, IH, IW, sp, OH, OW,
                       out.data() + static_cast<std::size_t>(n) * OC * ohow,
                       wide, static_cast<std::size_t>(n) * ihiw);
  for (int n = 0; n < N; ++n)
    for (int oc = 0; oc < OC; ++oc) {
      const double bias = b[static_cast<std::size_t>(oc)];
      double* p = out.data() + (static_cast<std::size_t>(n) * OC + oc) * ohow;
      for (std::size_t i = 0; i < ohow; ++i) p[i] += bias;
    }

  return detail::make_result(
      {N, OC, OH, OW}, std::move(out), {x, w, b},
      [x, w, b, sp, N, IC, IH, IW, OC, OH, OW, OCK](detail::Node* res) {
        res->backprop = [=]() {
          const std::size_t ihiw = static_cast<std::size_t>(IH) * IW;
          const std::size_t ohow = static_cast<std::size_t>(OH) * OW;
          const std::size_t wide = static_cast<std::size_t>(N) * ihiw;
          const std::vector<double>& gout = res->grad;
          if (b.node()->requires_grad) {
            double* db = b.node()->grad.data();
            for (int n = 0; n < N; ++n)
              for (int oc = 0; oc < OC; ++oc) {
                const double* g =
                    gout.data() + (static_cast<std::size_t>(n) * OC + oc) * ohow;
                double s = 0;
                for (std::size_t i = 0; i < ohow; ++i) s += g[i];
                db[oc] += s;
              }
          }
          if (!w.node()->requires_grad && !x.node()->requires_grad) return;

          // Gradient w.r.t. input is a forward conv of gout with the same
          // kernel (the adjoint pairing), expressed through im2col.
          std::vector<double> col_b(static_cast<std::size_t>(OCK) * wide);
          for (int n = 0; n < N; ++n)
            detail::im2col(gout.data() + static_cast<std::size_t>(n) * OC * ohow,
                           OC, OH, OW, sp, IH, IW, col_b.data(), wide,
                           static_cast<std::size_t>(n) * ihiw);
          if (x.node()->requires_grad) {
            std::vector<double> dx_b(static_cast<std::size_t>(IC) * wide, 0.0);
            detail::gemm_nn(w.data(), col_b.data(), dx_b.data(), IC, OCK,
                            static_cast<int>(wide));
            detail::scatter_sample_major(dx_b.data(), N, IC, ihiw,
                                         x.node()->grad.data(), true);
          }
          if (w.node()->requires_grad) {
            std::vector<double> x_b(static_cast<std::size_t>(IC) * wide);
            detail::gather_channel_major(x.data(), N, IC, ihiw, x_b.data());
            detail::gemm_nt(x_b.data(), col_b.data(), w.node()->grad.data(),
                            IC, static_cast<int>(wide), OCK);
          }
        };
      });
}

/// Running statistics and hyperparameters of one batch-norm layer.
struct BatchNorm2dState {
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double eps = 1e-5;
  double momentum = 0.1;

  void init(int channels) {
    running_mean.assign(static_cast<std::size_t>(channels), 0.0);
    running_var.assign(static_cast<std::size_t>(channels), 1.0);
  }
  bool initialized() const { return !running_mean.empty(); }
};

/// Per-channel batch normalization over [N,C,H,W].
///
/// Training mode normalizes by the batch statistics (biased variance) and
/// updates running stats with an exponential moving average (running variance
/// stores the unbiased estimate). Eval mode normalizes by the running stats.
inline Tensor batchnorm2d(const Tensor& x, const Tensor& gamma,
                          const Tensor& beta, BatchNorm2dState& state,
                          bool training) {
  detail::check_4d(x, "batchnorm2d", "input");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (static_cast<int>(gamma.numel()) != C ||
      static_cast<int>(beta.numel()) != C)
    throw ConfigError("batchnorm2d: gamma/beta length must equal channel "
                      "count " + std::to_string(C));
  if (training && N < 2)
    throw ConfigError("batchnorm2d: train mode requires batch size >= 2, got " +
                      std::to_string(N));
  if (!state.initialized()) state.init(C);
  if (static_cast<int>(state.running_mean.size()) != C)
    throw ConfigError("batchnorm2d: running stats track " +
                      std::to_string(state.running_mean.size()) +
                      " channels, input has " + std::to_string(C));

  const std::size_t plane = static_cast<std::size_t>(H) * W;
  const std::size_t cstride = static_cast<std::size_t>(C) * plane;
  const double m = static_cast<double>(N) * static_cast<double>(plane);

  std::vector<double> mean(C), var(C);
  if (training) {
    for (int c = 0; c < C; ++c) {
      double s = 0;
      for (int n = 0; n < N; ++n) {
        const double* p = x.data() + n * cstride + c * plane;
        for (std::size_t i = 0; i < plane; ++i) s += p[i];
      }
      mean[c] = s / m;
    }
    for (int c = 0; c < C; ++c) {
      double s = 0;
      for (int n = 0; n < N; ++n) {
        const double* p = x.data() + n * cstride + c * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const double d = p[i] - mean[c];
          s += d * d;
        }
      }
      var[c] = s / m;
    }
    const double mom = state.momentum;
    for (int c = 0; c < C; ++c) {
      state.running_mean[c] = (1 - mom) * state.running_mean[c] + mom * mean[c];
      state.running_var[c] =
          (1 - mom) * state.running_var[c] + mom * var[c] * m / (m - 1);
    }
  } else {
    mean = state.running_mean;
    var = state.running_var;
  }

  const double eps = state.eps;
  std::vector<double> out(x.numel());
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const double inv = 1.0 / std::sqrt(var[c] + eps);
      const double g = gamma[static_cast<std::size_t>(c)];
      const double bt = beta[static_cast<std::size_t>(c)];
      const double mu = mean[c];
      const double* p = x.data() + n * cstride + c * plane;
      double* o = out.data() + n * cstride + c * plane;
      for (std::size_t i = 0; i < plane; ++i) o[i] = g * (p[i] - mu) * inv + bt;
    }
  }

  return detail::make_result(
      {N, C, H, W}, std::move(out), {x, gamma, beta},
      [x, gamma, beta, mean, var, eps, training, N, C, plane,
       cstride, m](detail::Node* res) {
        res->backprop = [=]() {
          const std::vector<double>& gout = res->grad;
          for (int c = 0; c < C; ++c) {
            const double inv = 1.0 / std::sqrt(var[c] + eps);
            const double mu = mean[c];
            const double g = gamma[static_cast<std::size_t>(c)];
            // Channel-wise reductions shared by all three grads.
            double sum_dy = 0, sum_dy_xhat = 0;
            for (int n = 0; n < N; ++n) {
              const double* xp = x.data() + n * cstride + c * plane;
              const double* dy = gout.data() + n * cstride + c * plane;
              for (std::size_t i = 0; i < plane; ++i) {
                sum_dy += dy[i];
                sum_dy_xhat += dy[i] * (xp[i] - mu) * inv;
              }
            }
            if (beta.node()->requires_grad)
              beta.node()->grad[static_cast<std::size_t>(c)] += sum_dy;
            if (gamma.node()->requires_grad)
              gamma.node()->grad[static_cast<std::size_t>(c)] += sum_dy_xhat;
            if (x.node()->requires_grad) {
              double* gx = x.node()->grad.data();
              if (training) {
                const double mean_dy = sum_dy / m;
                const double mean_dy_xhat = sum_dy_xhat / m;
                for (int n = 0; n < N; ++n) {
                  const double* xp = x.data() + n * cstride + c * plane;
                  const double* dy = gout.data() + n * cstride + c * plane;
                  double* gp = gx + n * cstride + c * plane;
                  for (std::size_t i = 0; i < plane; ++i) {
                    const double xhat = (xp[i] - mu) * inv;
                    gp[i] += g * inv * (dy[i] - mean_dy - xhat * mean_dy_xhat);
                  }
                }
              } else {
                for (int n = 0; n < N; ++n) {
                  const double* dy = gout.data() + n * cstride + c * plane;
                  double* gp = gx + n * cstride + c * plane;
                  for (std::size_t i = 0; i < plane; ++i)
                    gp[i] += g * inv * dy[i];
                }
              }
            }
          }
        };
      });
}

/// Elementwise x >= 0 ? x : slope * x, slope in (0,1).
inline Tensor leaky_relu(const Tensor& x, double slope) {
  if (!(slope > 0.0 && slope < 1.0))
    throw ConfigError("leaky_relu: slope must be in (0,1), got " +
                      std::to_string(slope));
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = x[i];
    out[i] = v >= 0.0 ? v : slope * v;
  }
  return detail::make_result(x.shape(), std::move(out), {x},
                             [x, slope](detail::Node* res) {
                               res->backprop = [=]() {
                                 if (!x.node()->requires_grad) return;
                                 double* gx = x.node()->grad.data();
                                 for (std::size_t i = 0; i < res->grad.size();
                                      ++i)
                                   gx[i] += res->grad[i] *
                                            (x[i] >= 0.0 ? 1.0 : slope);
                               };
                             });
}

/// Numerically stable logistic function.
inline double sigmoid_scalar(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

inline Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid_scalar(x[i]);
  return detail::make_result(
      x.shape(), std::move(out), {x}, [x](detail::Node* res) {
        res->backprop = [=]() {
          if (!x.node()->requires_grad) return;
          double* gx = x.node()->grad.data();
          for (std::size_t i = 0; i < res->grad.size(); ++i) {
            const double s = res->values[i];
            gx[i] += res->grad[i] * s * (1.0 - s);
          }
        };
      });
}

/// Fully connected layer: x[N,F] * w[O,F]^T + b[O].
inline Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.shape().size() != 2 || w.shape().size() != 2)
    throw ConfigError("linear: input and weight must be 2-D");
  const int N = x.dim(0), F = x.dim(1), O = w.dim(0);
  if (w.dim(1) != F)
    throw ConfigError("linear: weight expects " + std::to_string(w.dim(1)) +
                      " features, input has " + std::to_string(F));
  if (static_cast<int>(b.numel()) != O)
    throw ConfigError("linear: bias length " + std::to_string(b.numel()) +
                      " != out features " + std::to_string(O));
  std::vector<double> out(static_cast<std::size_t>(N) * O, 0.0);
  detail::gemm_nt(x.data(), w.data(), out.data(), N, F, O);
  for (int n = 0; n < N; ++n)
    for (int o = 0; o < O; ++o)
      out[static_cast<std::size_t>(n) * O + o] += b[static_cast<std::size_t>(o)];
  return detail::make_result(
      {N, O}, std::move(out), {x, w, b}, [x, w, b, N, F, O](detail::Node* res) {
        res->backprop = [=]() {
          const std::vector<double>& g = res->grad;
          if (b.node()->requires_grad) {
            double* db = b.node()->grad.data();
            for (int n = 0; n < N; ++n)
              for (int o = 0; o < O; ++o)
                db[o] += g[static_cast<std::size_t>(n) * O + o];
          }
          if (w.node()->requires_grad) {
            std::vector<double> gt(static_cast<std::size_t>(O) * N);
            detail::transpose(g.data(), gt.data(), N, O);
            detail::gemm_nn(gt.data(), x.data(), w.node()->grad.data(), O, N, F);
          }
          if (x.node()->requires_grad)
            detail::gemm_nn(g.data(), w.data(), x.node()->grad.data(), N, O, F);
        };
      });
}

/// View with a new shape; element count must match.
inline Tensor reshape(const Tensor& x, std::vector<int> new_shape) {
  if (detail::shape_numel(new_shape) != x.numel())
    throw ConfigError("reshape: cannot view " + detail::shape_str(x.shape()) +
                      " as " + detail::shape_str(new_shape));
  std::vector<double> out = x.values();
  return detail::make_result(std::move(new_shape), std::move(out), {x},
                             [x](detail::Node* res) {
                               res->backprop = [=]() {
                                 if (!x.node()->requires_grad) return;
                                 double* gx = x.node()->grad.data();
                                 for (std::size_t i = 0; i < res->grad.size();
                                      ++i)
                                   gx[i] += res->grad[i];
                               };
                             });
}

/// Binary cross entropy, averaged over all entries. Probabilities are clamped
/// to [1e-7, 1-1e-7]; labels must be exactly 0 or 1.
inline Tensor bce_loss(const Tensor& p, const Tensor& y) {
  if (p.numel() != y.numel())
    throw ConfigError("bce_loss: probability and label sizes differ");
  constexpr double kEps = 1e-7;
  const std::size_t n = p.numel();
  double acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double yi = y[i];
    if (yi != 0.0 && yi != 1.0)
      throw ConfigError("bce_loss: labels must be 0 or 1, got " +
                        std::to_string(yi));
    const double pc = std::clamp(p[i], kEps, 1.0 - kEps);
    acc += -(yi * std::log(pc) + (1.0 - yi) * std::log(1.0 - pc));
  }
  return detail::make_result(
      {1}, {acc / static_cast<double>(n)}, {p, y}, [p, y, n](detail::Node* res) {
        res->backprop = [=]() {
          if (!p.node()->requires_grad) return;
          // The gradient is evaluated at the clamped probability so that
          // saturated predictions keep a finite, correctly-signed signal.
          constexpr double kEps = 1e-7;
          const double gl = res->grad[0] / static_cast<double>(n);
          double* gp = p.node()->grad.data();
          for (std::size_t i = 0; i < n; ++i) {
            const double pc = std::clamp(p[i], kEps, 1.0 - kEps);
            gp[i] += gl * (-y[i] / pc + (1.0 - y[i]) / (1.0 - pc));
          }
        };
      });
}

inline Tensor sum_all(const Tensor& x) {
  double s = 0;
  for (std::size_t i = 0; i < x.numel(); ++i) s += x[i];
  return detail::make_result({1}, {s}, {x}, [x](detail::Node* res) {
    res->backprop = [=]() {
      if (!x.node()->requires_grad) return;
      double* gx = x.node()->grad.data();
      const double g = res->grad[0];
      for (std::size_t i = 0; i < x.numel(); ++i) gx[i] += g;
    };
  });
}

inline Tensor mean_all(const Tensor& x) {
  double s = 0;
  for (std::size_t i = 0; i < x.numel(); ++i) s += x[i];
  const double n = static_cast<double>(x.numel());
  return detail::make_result({1}, {s / n}, {x}, [x, n](detail::Node* res) {
    res->backprop = [=]() {
      if (!x.node()->requires_grad) return;
      double* gx = x.node()->grad.data();
      const double g = res->grad[0] / n;
      for (std::size_t i = 0; i < x.numel(); ++i) gx[i] += g;
    };
  });
}

namespace detail {
inline void check_same_shape(const Tensor& a, const Tensor& b,
                             const char* op) {
  if (a.shape() != b.shape())
    throw ConfigError(std::string(op) + ": shapes " + shape_str(a.shape()) +
                      " and " + shape_str(b.shape()) + " differ");
}
}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return detail::make_result(a.shape(), std::move(out), {a, b},
                             [a, b](detail::Node* res) {
                               res->backprop = [=]() {
                                 for (const Tensor& t : {a, b}) {
                                   if (!t.node()->requires_grad) continue;
                                   double* g = t.node()->grad.data();
                                   for (std::size_t i = 0;
                                        i < res->grad.size(); ++i)
                                     g[i] += res->grad[i];
                                 }
                               };
                             });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return detail::make_result(
      a.shape(), std::move(out), {a, b}, [a, b](detail::Node* res) {
        res->backprop = [=]() {
          if (a.node()->requires_grad) {
            double* g = a.node()->grad.data();
            for (std::size_t i = 0; i < res->grad.size(); ++i)
              g[i] += res->grad[i];
          }
          if (b.node()->requires_grad) {
            double* g = b.node()->grad.data();
            for (std::size_t i = 0; i < res->grad.size(); ++i)
              g[i] -= res->grad[i];
          }
        };
      });
}

inline Tensor scale(const Tensor& x, double c) {
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * x[i];
  return detail::make_result(x.shape(), std::move(out), {x},
                             [x, c](detail::Node* res) {
                               res->backprop = [=]() {
                                 if (!x.node()->requires_grad) return;
                                 double* gx = x.node()->grad.data();
                                 for (std::size_t i = 0;
                                      i < res->grad.size(); ++i)
                                   gx[i] += c * res->grad[i];
                               };
                             });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return detail::make_result(
      a.shape(), std::move(out), {a, b}, [a, b](detail::Node* res) {
        res->backprop = [=]() {
          if (a.node()->requires_grad) {
            double* g = a.node()->grad.data();
            for (std::size_t i = 0; i < res->grad.size(); ++i)
              g[i] += res->grad[i] * b[i];
          }
          if (b.node()->requires_grad) {
            double* g = b.node()->grad.data();
            for (std::size_t i = 0; i < res->grad.size(); ++i)
              g[i] += res->grad[i] * a[i];
          }
        };
      });
}

}  // namespace scengen
