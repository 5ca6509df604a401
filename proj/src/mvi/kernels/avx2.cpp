/*
 * mvi : CNN-based myelin volume index mapping on synthetic phantoms
 *
 * Copyright 2026 the mvi authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "mvi/kernels/kernels.hpp"

#include <cmath>
#include <immintrin.h>

// AVX2+FMA lane. Accumulation order over k is ascending per output element,
// matching the scalar reference exactly; remainders fall back to scalar fmaf
// which is the same fused operation. This TU is compiled with -mavx2 -mfma
// and only entered after a cpuid check.

namespace mvi::kern {
namespace {

// 4 rows x 16 columns register block.
inline void micro_4x16(std::size_t K, const float* A, std::size_t lda,
                       const float* B, std::size_t ldb,
                       float* C, std::size_t ldc, bool accumulate) {
    __m256 c00, c01, c10, c11, c20, c21, c30, c31;
    if (accumulate) {
        c00 = _mm256_loadu_ps(C + 0 * ldc);     c01 = _mm256_loadu_ps(C + 0 * ldc + 8);
        c10 = _mm256_loadu_ps(C + 1 * ldc);     c11 = _mm256_loadu_ps(C + 1 * ldc + 8);
        c20 = _mm256_loadu_ps(C + 2 * ldc);     c21 = _mm256_loadu_ps(C + 2 * ldc + 8);
        c30 = _mm256_loadu_ps(C + 3 * ldc);     c31 = _mm256_loadu_ps(C + 3 * ldc + 8);
    } else {
        c00 = c01 = c10 = c11 = c20 = c21 = c30 = c31 = _mm256_setzero_ps();
    }
    for (std::size_t k = 0; k < K; ++k) {
        const __m256 b0 = _mm256_loadu_ps(B + k * ldb);
        const __m256 b1 = _mm256_loadu_ps(B + k * ldb + 8);
        const __m256 a0 = _mm256_broadcast_ss(A + 0 * lda + k);
        c00 = _mm256_fmadd_ps(a0, b0, c00);
        c01 = _mm256_fmadd_ps(a0, b1, c01);
        const __m256 a1 = _mm256_broadcast_ss(A + 1 * lda + k);
        c10 = _mm256_fmadd_ps(a1, b0, c10);
        c11 = _mm256_fmadd_ps(a1, b1, c11);
        const __m256 a2 = _mm256_broadcast_ss(A + 2 * lda + k);
        c20 = _mm256_fmadd_ps(a2, b0, c20);
        c21 = _mm256_fmadd_ps(a2, b1, c21);
        const __m256 a3 = _mm256_broadcast_ss(A + 3 * lda + k);
        c30 = _mm256_fmadd_ps(a3, b0, c30);
        c31 = _mm256_fmadd_ps(a3, b1, c31);
    }
    _mm256_storeu_ps(C + 0 * ldc, c00);     _mm256_storeu_ps(C + 0 * ldc + 8, c01);
    _mm256_storeu_ps(C + 1 * ldc, c10);     _mm256_storeu_ps(C + 1 * ldc + 8, c11);
    _mm256_storeu_ps(C + 2 * ldc, c20);     _mm256_storeu_ps(C + 2 * ldc + 8, c21);
    _mm256_storeu_ps(C + 3 * ldc, c30);     _mm256_storeu_ps(C + 3 * ldc + 8, c31);
}

// 4 rows x 8 columns.
inline void micro_4x8(std::size_t K, const float* A, std::size_t lda,
                      const float* B, std::size_t ldb,
                      float* C, std::size_t ldc, bool accumulate) {
    __m256 c0, c1, c2, c3;
    if (accumulate) {
        c0 = _mm256_loadu_ps(C + 0 * ldc);
        c1 = _mm256_loadu_ps(C + 1 * ldc);
        c2 = _mm256_loadu_ps(C + 2 * ldc);
        c3 = _mm256_loadu_ps(C + 3 * ldc);
    } else {
        c0 = c1 = c2 = c3 = _mm256_setzero_ps();
    }
    for (std::size_t k = 0; k < K; ++k) {
        const __m256 b = _mm256_loadu_ps(B + k * ldb);
        c0 = _mm256_fmadd_ps(_mm256_broadcast_ss(A + 0 * lda + k), b, c0);
        c1 = _mm256_fmadd_ps(_mm256_broadcast_ss(A + 1 * lda + k), b, c1);
        c2 = _mm256_fmadd_ps(_mm256_broadcast_ss(A + 2 * lda + k), b, c2);
        c3 = _mm256_fmadd_ps(_mm256_broadcast_ss(A + 3 * lda + k), b, c3);
    }
    _mm256_storeu_ps(C + 0 * ldc, c0);
    _mm256_storeu_ps(C + 1 * ldc, c1);
    _mm256_storeu_ps(C + 2 * ldc, c2);
    _mm256_storeu_ps(C + 3 * ldc, c3);
}

// 1 row x 8 columns.
inline void micro_1x8(std::size_t K, const float* A,
                      const float* B, std::size_t ldb, float* C,
                      bool accumulate) {
    __m256 c = accumulate ? _mm256_loadu_ps(C) : _mm256_setzero_ps();
    for (std::size_t k = 0; k < K; ++k)
        c = _mm256_fmadd_ps(_mm256_broadcast_ss(A + k),
                            _mm256_loadu_ps(B + k * ldb), c);
    _mm256_storeu_ps(C, c);
}

inline void scalar_cols(std::size_t ncols, std::size_t K,
                        const float* A, const float* B, std::size_t ldb,
                        float* C, bool accumulate) {
    for (std::size_t n = 0; n < ncols; ++n) {
        float acc = accumulate ? C[n] : 0.0f;
        for (std::size_t k = 0; k < K; ++k)
            acc = std::fmaf(A[k], B[k * ldb + n], acc);
        C[n] = acc;
    }
}

void gemm_avx2(std::size_t M, std::size_t N, std::size_t K,
               const float* A, std::size_t lda,
               const float* B, std::size_t ldb,
               float* C, std::size_t ldc, bool accumulate) {
    std::size_t m = 0;
    for (; m + 4 <= M; m += 4) {
        const float* a = A + m * lda;
        float* c = C + m * ldc;
        std::size_t n = 0;
        for (; n + 16 <= N; n += 16)
            micro_4x16(K, a, lda, B + n, ldb, c + n, ldc, accumulate);
        for (; n + 8 <= N; n += 8)
            micro_4x8(K, a, lda, B + n, ldb, c + n, ldc, accumulate);
        if (n < N)
            for (std::size_t r = 0; r < 4; ++r)
                scalar_cols(N - n, K, a + r * lda, B + n, ldb,
                            c + r * ldc + n, accumulate);
    }
    for (; m < M; ++m) {
        const float* a = A + m * lda;
        float* c = C + m * ldc;
        std::size_t n = 0;
        for (; n + 8 <= N; n += 8)
            micro_1x8(K, a, B + n, ldb, c + n, accumulate);
        if (n < N) scalar_cols(N - n, K, a, B + n, ldb, c + n, accumulate);
    }
}

void gemm_tn_avx2(std::size_t M, std::size_t N, std::size_t K,
                  const float* A, std::size_t lda,
                  const float* B, std::size_t ldb,
                  float* C, std::size_t ldc, bool accumulate) {
    if (!accumulate) {
        for (std::size_t m = 0; m < M; ++m)
            for (std::size_t n = 0; n < N; ++n) C[m * ldc + n] = 0.0f;
    }
    for (std::size_t k = 0; k < K; ++k) {
        const float* arow = A + k * lda;
        const float* brow = B + k * ldb;
        for (std::size_t m = 0; m < M; ++m) {
            const __m256 a = _mm256_broadcast_ss(arow + m);
            float* crow = C + m * ldc;
            std::size_t n = 0;
            for (; n + 8 <= N; n += 8) {
                __m256 c = _mm256_loadu_ps(crow + n);
                c = _mm256_fmadd_ps(a, _mm256_loadu_ps(brow + n), c);
                _mm256_storeu_ps(crow + n, c);
            }
            const float as = arow[m];
            for (; n < N; ++n) crow[n] = std::fmaf(as, brow[n], crow[n]);
        }
    }
}

void bias_relu_avx2(std::size_t rows, std::size_t channels,
                    const float* x, const float* bias, float* y) {
    const __m256 zero = _mm256_setzero_ps();
    for (std::size_t r = 0; r < rows; ++r) {
        const float* xr = x + r * channels;
        float* yr = y + r * channels;
        std::size_t c = 0;
        for (; c + 8 <= channels; c += 8) {
            __m256 v = _mm256_add_ps(_mm256_loadu_ps(xr + c),
                                     _mm256_loadu_ps(bias + c));
            _mm256_storeu_ps(yr + c, _mm256_max_ps(v, zero));
        }
        for (; c < channels; ++c) {
            float v = xr[c] + bias[c];
            yr[c] = v > 0.0f ? v : 0.0f;
        }
    }
}

void bias_add_avx2(std::size_t rows, std::size_t channels,
                   const float* x, const float* bias, float* y) {
    for (std::size_t r = 0; r < rows; ++r) {
        const float* xr = x + r * channels;
        float* yr = y + r * channels;
        std::size_t c = 0;
        for (; c + 8 <= channels; c += 8)
            _mm256_storeu_ps(yr + c, _mm256_add_ps(_mm256_loadu_ps(xr + c),
                                                   _mm256_loadu_ps(bias + c)));
        for (; c < channels; ++c) yr[c] = xr[c] + bias[c];
    }
}

void relu_bwd_avx2(std::size_t n, const float* out, float* g) {
    const __m256 zero = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(out + i), zero, _CMP_GT_OQ);
        _mm256_storeu_ps(g + i, _mm256_and_ps(_mm256_loadu_ps(g + i), mask));
    }
    for (; i < n; ++i)
        if (!(out[i] > 0.0f)) g[i] = 0.0f;
}

void axpy_avx2(std::size_t n, float a, const float* x, float* y) {
    const __m256 av = _mm256_set1_ps(a);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 v = _mm256_fmadd_ps(av, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i));
        _mm256_storeu_ps(y + i, v);
    }
    for (; i < n; ++i) y[i] = std::fmaf(a, x[i], y[i]);
}

void adam_avx2(std::size_t n, float* p, float* m, float* v, const float* g,
               float lr, float beta1, float beta2, float eps,
               float corr1, float corr2) {
    const __m256 b1 = _mm256_set1_ps(beta1), om1 = _mm256_set1_ps(1.0f - beta1);
    const __m256 b2 = _mm256_set1_ps(beta2), om2 = _mm256_set1_ps(1.0f - beta2);
    const __m256 c1 = _mm256_set1_ps(corr1), c2 = _mm256_set1_ps(corr2);
    const __m256 lrv = _mm256_set1_ps(lr), epsv = _mm256_set1_ps(eps);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 gi = _mm256_loadu_ps(g + i);
        // mul+add (not fmadd) to match the scalar reference's two roundings
        __m256 mi = _mm256_add_ps(_mm256_mul_ps(b1, _mm256_loadu_ps(m + i)),
                                  _mm256_mul_ps(om1, gi));
        __m256 vi = _mm256_add_ps(_mm256_mul_ps(b2, _mm256_loadu_ps(v + i)),
                                  _mm256_mul_ps(om2, _mm256_mul_ps(gi, gi)));
        _mm256_storeu_ps(m + i, mi);
        _mm256_storeu_ps(v + i, vi);
        const __m256 mhat = _mm256_div_ps(mi, c1);
        const __m256 vhat = _mm256_div_ps(vi, c2);
        const __m256 denom = _mm256_add_ps(_mm256_sqrt_ps(vhat), epsv);
        const __m256 step = _mm256_mul_ps(lrv, _mm256_div_ps(mhat, denom));
        _mm256_storeu_ps(p + i, _mm256_sub_ps(_mm256_loadu_ps(p + i), step));
    }
    const float som1 = 1.0f - beta1, som2 = 1.0f - beta2;
    for (; i < n; ++i) {
        const float gi = g[i];
        m[i] = beta1 * m[i] + som1 * gi;
        v[i] = beta2 * v[i] + som2 * (gi * gi);
        const float mhat = m[i] / corr1;
        const float vhat = v[i] / corr2;
        p[i] = p[i] - lr * (mhat / (std::sqrt(vhat) + eps));
    }
}

} // namespace

const KernelTable& avx2_table() {
    static const KernelTable t{gemm_avx2, gemm_tn_avx2, bias_relu_avx2,
                               bias_add_avx2, relu_bwd_avx2, axpy_avx2,
                               adam_avx2, "avx2"};
    return t;
}

} // namespace mvi::kern
