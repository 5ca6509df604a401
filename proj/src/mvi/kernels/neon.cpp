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

#include <arm_neon.h>
#include <cmath>

// NEON lane (aarch64). Same contract as the AVX2 lane: per-element
// accumulation order matches the scalar reference and vfmaq is the same
// fused multiply-add as std::fmaf.

namespace mvi::kern {
namespace {

inline void micro_4x4(std::size_t K, const float* A, std::size_t lda,
                      const float* B, std::size_t ldb,
                      float* C, std::size_t ldc, bool accumulate) {
    float32x4_t c0, c1, c2, c3;
    if (accumulate) {
        c0 = vld1q_f32(C + 0 * ldc);
        c1 = vld1q_f32(C + 1 * ldc);
        c2 = vld1q_f32(C + 2 * ldc);
        c3 = vld1q_f32(C + 3 * ldc);
    } else {
        c0 = c1 = c2 = c3 = vdupq_n_f32(0.0f);
    }
    for (std::size_t k = 0; k < K; ++k) {
        const float32x4_t b = vld1q_f32(B + k * ldb);
        c0 = vfmaq_n_f32(c0, b, A[0 * lda + k]);
        c1 = vfmaq_n_f32(c1, b, A[1 * lda + k]);
        c2 = vfmaq_n_f32(c2, b, A[2 * lda + k]);
        c3 = vfmaq_n_f32(c3, b, A[3 * lda + k]);
    }
    vst1q_f32(C + 0 * ldc, c0);
    vst1q_f32(C + 1 * ldc, c1);
    vst1q_f32(C + 2 * ldc, c2);
    vst1q_f32(C + 3 * ldc, c3);
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

void gemm_neon(std::size_t M, std::size_t N, std::size_t K,
               const float* A, std::size_t lda,
               const float* B, std::size_t ldb,
               float* C, std::size_t ldc, bool accumulate) {
    std::size_t m = 0;
    for (; m + 4 <= M; m += 4) {
        const float* a = A + m * lda;
        float* c = C + m * ldc;
        std::size_t n = 0;
        for (; n + 4 <= N; n += 4)
            micro_4x4(K, a, lda, B + n, ldb, c + n, ldc, accumulate);
        if (n < N)
            for (std::size_t r = 0; r < 4; ++r)
                scalar_cols(N - n, K, a + r * lda, B + n, ldb,
                            c + r * ldc + n, accumulate);
    }
    for (; m < M; ++m) {
        const float* a = A + m * lda;
        float* c = C + m * ldc;
        std::size_t n = 0;
        for (; n + 4 <= N; n += 4) {
            float32x4_t acc = accumulate ? vld1q_f32(c + n) : vdupq_n_f32(0.0f);
            for (std::size_t k = 0; k < K; ++k)
                acc = vfmaq_n_f32(acc, vld1q_f32(B + k * ldb + n), a[k]);
            vst1q_f32(c + n, acc);
        }
        if (n < N) scalar_cols(N - n, K, a, B + n, ldb, c + n, accumulate);
    }
}

void gemm_tn_neon(std::size_t M, std::size_t N, std::size_t K,
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
            const float a = arow[m];
            float* crow = C + m * ldc;
            std::size_t n = 0;
            for (; n + 4 <= N; n += 4) {
                float32x4_t c = vld1q_f32(crow + n);
                c = vfmaq_n_f32(c, vld1q_f32(brow + n), a);
                vst1q_f32(crow + n, c);
            }
            for (; n < N; ++n) crow[n] = std::fmaf(a, brow[n], crow[n]);
        }
    }
}

void bias_relu_neon(std::size_t rows, std::size_t channels,
                    const float* x, const float* bias, float* y) {
    const float32x4_t zero = vdupq_n_f32(0.0f);
    for (std::size_t r = 0; r < rows; ++r) {
        const float* xr = x + r * channels;
        float* yr = y + r * channels;
        std::size_t c = 0;
        for (; c + 4 <= channels; c += 4) {
            float32x4_t v = vaddq_f32(vld1q_f32(xr + c), vld1q_f32(bias + c));
            vst1q_f32(yr + c, vmaxq_f32(v, zero));
        }
        for (; c < channels; ++c) {
            float v = xr[c] + bias[c];
            yr[c] = v > 0.0f ? v : 0.0f;
        }
    }
}

void bias_add_neon(std::size_t rows, std::size_t channels,
                   const float* x, const float* bias, float* y) {
    for (std::size_t r = 0; r < rows; ++r) {
        const float* xr = x + r * channels;
        float* yr = y + r * channels;
        std::size_t c = 0;
        for (; c + 4 <= channels; c += 4)
            vst1q_f32(yr + c, vaddq_f32(vld1q_f32(xr + c), vld1q_f32(bias + c)));
        for (; c < channels; ++c) yr[c] = xr[c] + bias[c];
    }
}

void relu_bwd_neon(std::size_t n, const float* out, float* g) {
    const float32x4_t zero = vdupq_n_f32(0.0f);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const uint32x4_t mask = vcgtq_f32(vld1q_f32(out + i), zero);
        const uint32x4_t gv = vreinterpretq_u32_f32(vld1q_f32(g + i));
        vst1q_f32(g + i, vreinterpretq_f32_u32(vandq_u32(gv, mask)));
    }
    for (; i < n; ++i)
        if (!(out[i] > 0.0f)) g[i] = 0.0f;
}

void axpy_neon(std::size_t n, float a, const float* x, float* y) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        vst1q_f32(y + i, vfmaq_n_f32(vld1q_f32(y + i), vld1q_f32(x + i), a));
    for (; i < n; ++i) y[i] = std::fmaf(a, x[i], y[i]);
}

void adam_neon(std::size_t n, float* p, float* m, float* v, const float* g,
               float lr, float beta1, float beta2, float eps,
               float corr1, float corr2) {
    const float om1 = 1.0f - beta1, om2 = 1.0f - beta2;
    const float32x4_t b1 = vdupq_n_f32(beta1), o1 = vdupq_n_f32(om1);
    const float32x4_t b2 = vdupq_n_f32(beta2), o2 = vdupq_n_f32(om2);
    const float32x4_t c1 = vdupq_n_f32(corr1), c2 = vdupq_n_f32(corr2);
    const float32x4_t lrv = vdupq_n_f32(lr), epsv = vdupq_n_f32(eps);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float32x4_t gi = vld1q_f32(g + i);
        float32x4_t mi = vaddq_f32(vmulq_f32(b1, vld1q_f32(m + i)), vmulq_f32(o1, gi));
        float32x4_t vi = vaddq_f32(vmulq_f32(b2, vld1q_f32(v + i)),
                                   vmulq_f32(o2, vmulq_f32(gi, gi)));
        vst1q_f32(m + i, mi);
        vst1q_f32(v + i, vi);
        const float32x4_t mhat = vdivq_f32(mi, c1);
        const float32x4_t vhat = vdivq_f32(vi, c2);
        const float32x4_t denom = vaddq_f32(vsqrtq_f32(vhat), epsv);
        const float32x4_t step = vmulq_f32(lrv, vdivq_f32(mhat, denom));
        vst1q_f32(p + i, vsubq_f32(vld1q_f32(p + i), step));
    }
    for (; i < n; ++i) {
        const float gi = g[i];
        m[i] = beta1 * m[i] + om1 * gi;
        v[i] = beta2 * v[i] + om2 * (gi * gi);
        const float mhat = m[i] / corr1;
        const float vhat = v[i] / corr2;
        p[i] = p[i] - lr * (mhat / (std::sqrt(vhat) + eps));
    }
}

} // namespace

const KernelTable& neon_table() {
    static const KernelTable t{gemm_neon, gemm_tn_neon, bias_relu_neon,
                               bias_add_neon, relu_bwd_neon, axpy_neon,
                               adam_neon, "neon"};
    return t;
}

} // namespace mvi::kern
