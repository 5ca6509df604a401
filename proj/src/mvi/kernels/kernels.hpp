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
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace mvi::kern {

// Hot float32 inner loops behind a runtime-dispatched table. Every SIMD
// variant is written to produce bit-identical results to the scalar
// reference: identical per-element accumulation order (k ascending), fused
// multiply-add on both lanes (std::fmaf <-> vfmadd), and IEEE div/sqrt.
// The equivalence tests assert exact equality, not a tolerance.

/// C[M x N] (+)= A[M x K] * B[K x N], all row-major with explicit leading
/// dimensions. Accumulation over k is ascending per output element.
using GemmFn = void (*)(std::size_t M, std::size_t N, std::size_t K,
                        const float* A, std::size_t lda,
                        const float* B, std::size_t ldb,
                        float* C, std::size_t ldc, bool accumulate);

/// C[M x N] (+)= A^T * B where A is stored [K x M]; used for weight grads.
using GemmTnFn = GemmFn;

/// y[i, c] = max(0, x[i, c] + bias[c]) over `rows` rows of `channels`.
using BiasReluFn = void (*)(std::size_t rows, std::size_t channels,
                            const float* x, const float* bias, float* y);

/// y[i, c] = x[i, c] + bias[c].
using BiasAddFn = BiasReluFn;

/// g[i] = out[i] > 0 ? g[i] : 0 (ReLU gate from the stored activation).
using ReluBwdFn = void (*)(std::size_t n, const float* out, float* g);

/// y[i] = fma(a, x[i], y[i]).
using AxpyFn = void (*)(std::size_t n, float a, const float* x, float* y);

/// One Adam step over a flat parameter block; corr1/corr2 are the
/// bias-correction denominators (1 - beta^t) for the current step.
using AdamFn = void (*)(std::size_t n, float* p, float* m, float* v,
                        const float* g, float lr, float beta1, float beta2,
                        float eps, float corr1, float corr2);

struct KernelTable {
    GemmFn gemm;
    GemmTnFn gemm_tn;
    BiasReluFn bias_relu;
    BiasAddFn bias_add;
    ReluBwdFn relu_bwd;
    AxpyFn axpy;
    AdamFn adam;
    const char* name;
};

enum class Backend { scalar, avx2, neon };

const KernelTable& scalar_table();
#ifdef MVI_HAVE_AVX2_TU
const KernelTable& avx2_table();
#endif
#ifdef MVI_HAVE_NEON_TU
const KernelTable& neon_table();
#endif

/// Active table: best available backend unless overridden by set_backend()
/// or the MVI_KERNEL environment variable (scalar|avx2|neon|auto).
const KernelTable& active();
bool backend_available(Backend b);
void set_backend(Backend b);   // throws if unavailable
void reset_backend();          // back to auto selection
std::string active_name();

} // namespace mvi::kern
