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

// Reference lane. The SIMD variants must reproduce these loops element for
// element; keep accumulation order (k ascending) and the explicit fmaf.

namespace mvi::kern {
namespace {

void gemm_scalar(std::size_t M, std::size_t N, std::size_t K,
                 const float* A, std::size_t lda,
                 const float* B, std::size_t ldb,
                 float* C, std::size_t ldc, bool accumulate) {
    for (std::size_t m = 0; m < M; ++m) {
        float* crow = C + m * ldc;
        if (!accumulate) {
            for (std::size_t n = 0; n < N; ++n) crow[n] = 0.0f;
        }
        const float* arow = A + m * lda;
        for (std::size_t k = 0; k < K; ++k) {
            const float a = arow[k];
            const float* brow = B + k * ldb;
            for (std::size_t n = 0; n < N; ++n)
                crow[n] = std::fmaf(a, brow[n], crow[n]);
        }
    }
}

void gemm_tn_scalar(std::size_t M, std::size_t N, std::size_t K,
                    const float* A, std::size_t lda,
                    const float* B, std::size_t ldb,
                    float* C, std::size_t ldc, bool accumulate) {
    if (!accumulate) {
        for (std::size_t m = 0; m < M; ++m)
            for (std::size_t n = 0; n < N; ++n) C[m * ldc + n] = 0.0f;
    }
    for (std::size_t k = 0; k < K; ++k) {
        const float* arow = A + k * lda; // A[k, m]
        const float* brow = B + k * ldb;
        for (std::size_t m = 0; m < M; ++m) {
            const float a = arow[m];
            float* crow = C + m * ldc;
            for (std::size_t n = 0; n < N; ++n)
                crow[n] = std::fmaf(a, brow[n], crow[n]);
        }
    }
}

void bias_relu_scalar(std::size_t rows, std::size_t channels,
                      const float* x, const float* bias, float* y) {
    for (std::size_t r = 0; r < rows; ++r) {
        const float* xr = x + r * channels;
        float* yr = y + r * channels;
        for (std::size_t c = 0; c < channels; ++c) {
            float v = xr[c] + bias[c];
            yr[c] = v > 0.0f ? v : 0.0f;
        }
    }
}

void bias_add_scalar(std::size_t rows, std::size_t channels,
                     const float* x, const float* bias, float* y) {
    for (std::size_t r = 0; r < rows; ++r) {
        const float* xr = x + r * channels;
        float* yr = y + r * channels;
        for (std::size_t c = 0; c < channels; ++c) yr[c] = xr[c] + bias[c];
    }
}

void relu_bwd_scalar(std::size_t n, const float* out, float* g) {
    for (std::size_t i = 0; i < n; ++i)
        if (!(out[i] > 0.0f)) g[i] = 0.0f;
}

void axpy_scalar(std::size_t n, float a, const float* x, float* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] = std::fmaf(a, x[i], y[i]);
}

void adam_scalar(std::size_t n, float* p, float* m, float* v, const float* g,
                 float lr, float beta1, float beta2, float eps,
                 float corr1, float corr2) {
    const float om1 = 1.0f - beta1;
    const float om2 = 1.0f - beta2;
    for (std::size_t i = 0; i < n; ++i) {
        const float gi = g[i];
        m[i] = beta1 * m[i] + om1 * gi;
        v[i] = beta2 * v[i] + om2 * (gi * gi);
        const float mhat = m[i] / corr1;
        const float vhat = v[i] / corr2;
        p[i] = p[i] - lr * (mhat / (std::sqrt(vhat) + eps));
    }
}

} // namespace

const KernelTable& scalar_table() {
    static const KernelTable t{gemm_scalar, gemm_tn_scalar, bias_relu_scalar,
                               bias_add_scalar, relu_bwd_scalar, axpy_scalar,
                               adam_scalar, "scalar"};
    return t;
}

} // namespace mvi::kern
