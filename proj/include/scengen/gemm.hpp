// Copyright 2026 The scengen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

#if defined(__AVX512F__)
#include <immintrin.h>
#endif

namespace scengen::detail {

// Small row-major GEMM kernels for the convolution lowerings. All of them
// accumulate (C += ...), are single threaded, and sum each element in
// ascending-k order, so results are bit-reproducible run to run. An AVX-512
// microkernel carries the hot path where available; the portable loops are
// the reference.

#if defined(__AVX512F__)

/// C[M,N] += A[M,K] * B[K,N]; 4x16 register tile over C.
inline void gemm_nn(const double* A, const double* B, double* C, int M, int K,
                    int N) {
  int j0 = 0;
  for (; j0 + 16 <= N; j0 += 16) {
    int i0 = 0;
    for (; i0 + 4 <= M; i0 += 4) {
      __m512d c00 = _mm512_loadu_pd(C + static_cast<std::size_t>(i0 + 0) * N + j0);
      __m512d c01 = _mm512_loadu_pd(C + static_cast<std::size_t>(i0 + 0) * N + j0 + 8);
      __m512d c10 = _mm512_loadu_pd(C + static_cast<std::size_t>(i0 + 1) * N + j0);
      __m512d c11 = _mm512_loadu_pd(C + static_cast<std::size_t>(i0 + 1) * N + j0 + 8);
      __m512d c20 = _mm512_loadu_pd(C + static_cast<std::size_t>(i0 + 2) * N + j0);
      __m512d c21 = _mm512_loadu_pd(C + static_cast<std::size_t>(i0 + 2) * N + j0 + 8);
      __m512d c30 = _mm512_loadu_pd(C + static_cast<std::size_t>(i0 + 3) * N + j0);
      __m512d c31 = _mm512_loadu_pd(C + static_cast<std::size_t>(i0 + 3) * N + j0 + 8);
      for (int k = 0; k < K; ++k) {
        const __m512d b0 = _mm512_loadu_pd(B + static_cast<std::size_t>(k) * N + j0);
        const __m512d b1 = _mm512_loadu_pd(B + static_cast<std::size_t>(k) * N + j0 + 8);
        const __m512d a0 = _mm512_set1_pd(A[static_cast<std::size_t>(i0 + 0) * K + k]);
        const __m512d a1 = _mm512_set1_pd(A[static_cast<std::size_t>(i0 + 1) * K + k]);
        const __m512d a2 = _mm512_set1_pd(A[static_cast<std::size_t>(i0 + 2) * K + k]);
        const __m512d a3 = _mm512_set1_pd(A[static_cast<std::size_t>(i0 + 3) * K + k]);
        c00 = _mm512_fmadd_pd(a0, b0, c00);
        c01 = _mm512_fmadd_pd(a0, b1, c01);
        c10 = _mm512_fmadd_pd(a1, b0, c10);
        c11 = _mm512_fmadd_pd(a1, b1, c11);
        c20 = _mm512_fmadd_pd(a2, b0, c20);
        c21 = _mm512_fmadd_pd(a2, b1, c21);
        c30 = _mm512_fmadd_pd(a3, b0, c30);
        c31 = _mm512_fmadd_pd(a3, b1, c31);
      }
      _mm512_storeu_pd(C + static_cast<std::size_t>(i0 + 0) * N + j0, c00);
      _mm512_storeu_pd(C + static_cast<std::size_t>(i0 + 0) * N + j0 + 8, c01);
      _mm512_storeu_pd(C + static_cast<std::size_t>(i0 + 1) * N + j0, c10);
      _mm512_storeu_pd(C + static_cast<std::size_t>(i0 + 1) * N + j0 + 8, c11);
      _mm512_storeu_pd(C + static_cast<std::size_t>(i0 + 2) * N + j0, c20);
      _mm512_storeu_pd(C + static_cast<std::size_t>(i0 + 2) * N + j0 + 8, c21);
      _mm512_storeu_pd(C + static_cast<std::size_t>(i0 + 3) * N + j0, c30);
      _mm512_storeu_pd(C + static_cast<std::size_t>(i0 + 3) * N + j0 + 8, c31);
    }
    for (; i0 < M; ++i0) {
      __m512d c0 = _mm512_loadu_pd(C + static_cast<std::size_t>(i0) * N + j0);
      __m512d c1 = _mm512_loadu_pd(C + static_cast<std::size_t>(i0) * N + j0 + 8);
      for (int k = 0; k < K; ++k) {
        const __m512d a = _mm512_set1_pd(A[static_cast<std::size_t>(i0) * K + k]);
        c0 = _mm512_fmadd_pd(a, _mm512_loadu_pd(B + static_cast<std::size_t>(k) * N + j0), c0);
        c1 = _mm512_fmadd_pd(a, _mm512_loadu_pd(B + static_cast<std::size_t>(k) * N + j0 + 8), c1);
      }
      _mm512_storeu_pd(C + static_cast<std::size_t>(i0) * N + j0, c0);
      _mm512_storeu_pd(C + static_cast<std::size_t>(i0) * N + j0 + 8, c1);
    }
  }
  if (j0 < N) {
    const int jn = N - j0;
    for (int i = 0; i < M; ++i) {
      double* __restrict c = C + static_cast<std::size_t>(i) * N + j0;
      for (int k = 0; k < K; ++k) {
        const double a = A[static_cast<std::size_t>(i) * K + k];
        const double* __restrict b = B + static_cast<std::size_t>(k) * N + j0;
        for (int j = 0; j < jn; ++j) c[j] += a * b[j];
      }
    }
  }
}

#else  // portable fallback

inline void gemm_nn(const double* A, const double* B, double* C, int M, int K,
                    int N) {
  constexpr int kTileN = 256;
  for (int j0 = 0; j0 < N; j0 += kTileN) {
    const int jn = (N - j0) < kTileN ? (N - j0) : kTileN;
    int i = 0;
    for (; i + 4 <= M; i += 4) {
      double* __restrict c0 = C + static_cast<std::size_t>(i + 0) * N + j0;
      double* __restrict c1 = C + static_cast<std::size_t>(i + 1) * N + j0;
      double* __restrict c2 = C + static_cast<std::size_t>(i + 2) * N + j0;
      double* __restrict c3 = C + static_cast<std::size_t>(i + 3) * N + j0;
      for (int k = 0; k < K; ++k) {
        const double a0 = A[static_cast<std::size_t>(i + 0) * K + k];
        const double a1 = A[static_cast<std::size_t>(i + 1) * K + k];
        const double a2 = A[static_cast<std::size_t>(i + 2) * K + k];
        const double a3 = A[static_cast<std::size_t>(i + 3) * K + k];
        const double* __restrict b = B + static_cast<std::size_t>(k) * N + j0;
        for (int j = 0; j < jn; ++j) {
          c0[j] += a0 * b[j];
          c1[j] += a1 * b[j];
          c2[j] += a2 * b[j];
          c3[j] += a3 * b[j];
        }
      }
    }
    for (; i < M; ++i) {
      double* __restrict c0 = C + static_cast<std::size_t>(i) * N + j0;
      for (int k = 0; k < K; ++k) {
        const double a0 = A[static_cast<std::size_t>(i) * K + k];
        const double* __restrict b = B + static_cast<std::size_t>(k) * N + j0;
        for (int j = 0; j < jn; ++j) c0[j] += a0 * b[j];
      }
    }
  }
}

#endif  // __AVX512F__

/// C[M,N] += A[M,K] * B[N,K]^T   (rows of B are the reduction vectors)
inline void gemm_nt(const double* A, const double* B, double* C, int M, int K,
                    int N) {
#if defined(__AVX512F__)
  const int kv = K - (K % 8);
  for (int i = 0; i < M; ++i) {
    const double* __restrict a = A + static_cast<std::size_t>(i) * K;
    int j = 0;
    for (; j + 4 <= N; j += 4) {
      const double* __restrict b0 = B + static_cast<std::size_t>(j + 0) * K;
      const double* __restrict b1 = B + static_cast<std::size_t>(j + 1) * K;
      const double* __restrict b2 = B + static_cast<std::size_t>(j + 2) * K;
      const double* __restrict b3 = B + static_cast<std::size_t>(j + 3) * K;
      __m512d s0 = _mm512_setzero_pd(), s1 = _mm512_setzero_pd();
      __m512d s2 = _mm512_setzero_pd(), s3 = _mm512_setzero_pd();
      for (int k = 0; k < kv; k += 8) {
        const __m512d av = _mm512_loadu_pd(a + k);
        s0 = _mm512_fmadd_pd(av, _mm512_loadu_pd(b0 + k), s0);
        s1 = _mm512_fmadd_pd(av, _mm512_loadu_pd(b1 + k), s1);
        s2 = _mm512_fmadd_pd(av, _mm512_loadu_pd(b2 + k), s2);
        s3 = _mm512_fmadd_pd(av, _mm512_loadu_pd(b3 + k), s3);
      }
      double t0 = _mm512_reduce_add_pd(s0), t1 = _mm512_reduce_add_pd(s1);
      double t2 = _mm512_reduce_add_pd(s2), t3 = _mm512_reduce_add_pd(s3);
      for (int k = kv; k < K; ++k) {
        const double av = a[k];
        t0 += av * b0[k];
        t1 += av * b1[k];
        t2 += av * b2[k];
        t3 += av * b3[k];
      }
      double* c = C + static_cast<std::size_t>(i) * N + j;
      c[0] += t0;
      c[1] += t1;
      c[2] += t2;
      c[3] += t3;
    }
    for (; j < N; ++j) {
      const double* __restrict b = B + static_cast<std::size_t>(j) * K;
      __m512d s = _mm512_setzero_pd();
      for (int k = 0; k < kv; k += 8)
        s = _mm512_fmadd_pd(_mm512_loadu_pd(a + k), _mm512_loadu_pd(b + k), s);
      double t = _mm512_reduce_add_pd(s);
      for (int k = kv; k < K; ++k) t += a[k] * b[k];
      C[static_cast<std::size_t>(i) * N + j] += t;
    }
  }
#else
  for (int i = 0; i < M; ++i) {
    const double* __restrict a = A + static_cast<std::size_t>(i) * K;
    int j = 0;
    for (; j + 4 <= N; j += 4) {
      const double* __restrict b0 = B + static_cast<std::size_t>(j + 0) * K;
      const double* __restrict b1 = B + static_cast<std::size_t>(j + 1) * K;
      const double* __restrict b2 = B + static_cast<std::size_t>(j + 2) * K;
      const double* __restrict b3 = B + static_cast<std::size_t>(j + 3) * K;
      double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
      for (int k = 0; k < K; ++k) {
        const double av = a[k];
        s0 += av * b0[k];
        s1 += av * b1[k];
        s2 += av * b2[k];
        s3 += av * b3[k];
      }
      double* c = C + static_cast<std::size_t>(i) * N + j;
      c[0] += s0;
      c[1] += s1;
      c[2] += s2;
      c[3] += s3;
    }
    for (; j < N; ++j) {
      const double* __restrict b = B + static_cast<std::size_t>(j) * K;
      double s = 0;
      for (int k = 0; k < K; ++k) s += a[k] * b[k];
      C[static_cast<std::size_t>(i) * N + j] += s;
    }
  }
#endif
}

/// out[N,M] = in[M,N]^T
inline void transpose(const double* in, double* out, int M, int N) {
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < N; ++j)
      out[static_cast<std::size_t>(j) * M + i] =
          in[static_cast<std::size_t>(i) * N + j];
}

}  // namespace scengen::detail
