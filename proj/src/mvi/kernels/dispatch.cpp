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

#include "mvi/common.hpp"

#include <atomic>
#include <cstdlib>

namespace mvi::kern {
namespace {

bool cpu_has_avx2_fma() {
#if defined(__x86_64__) || defined(_M_X64)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable* pick_auto() {
#ifdef MVI_HAVE_AVX2_TU
    if (cpu_has_avx2_fma()) return &avx2_table();
#endif
#ifdef MVI_HAVE_NEON_TU
    return &neon_table();
#endif
    return &scalar_table();
}

const KernelTable* from_env() {
    const char* e = std::getenv("MVI_KERNEL");
    if (!e) return nullptr;
    const std::string s(e);
    if (s == "auto" || s.empty()) return nullptr;
    if (s == "scalar") return &scalar_table();
#ifdef MVI_HAVE_AVX2_TU
    if (s == "avx2") {
        require(cpu_has_avx2_fma(), "MVI_KERNEL=avx2 but CPU lacks AVX2+FMA");
        return &avx2_table();
    }
#endif
#ifdef MVI_HAVE_NEON_TU
    if (s == "neon") return &neon_table();
#endif
    fail("MVI_KERNEL=", s, " is not a backend built into this binary");
}

std::atomic<const KernelTable*> g_active{nullptr};

const KernelTable* resolve() {
    const KernelTable* t = g_active.load(std::memory_order_acquire);
    if (t) return t;
    t = from_env();
    if (!t) t = pick_auto();
    g_active.store(t, std::memory_order_release);
    return t;
}

} // namespace

const KernelTable& active() { return *resolve(); }

bool backend_available(Backend b) {
    switch (b) {
        case Backend::scalar: return true;
        case Backend::avx2:
#ifdef MVI_HAVE_AVX2_TU
            return cpu_has_avx2_fma();
#else
            return false;
#endif
        case Backend::neon:
#ifdef MVI_HAVE_NEON_TU
            return true;
#else
            return false;
#endif
    }
    return false;
}

void set_backend(Backend b) {
    require(backend_available(b), "requested kernel backend is unavailable");
    switch (b) {
        case Backend::scalar: g_active.store(&scalar_table()); break;
        case Backend::avx2:
#ifdef MVI_HAVE_AVX2_TU
            g_active.store(&avx2_table());
#endif
            break;
        case Backend::neon:
#ifdef MVI_HAVE_NEON_TU
            g_active.store(&neon_table());
#endif
            break;
    }
}

void reset_backend() { g_active.store(nullptr); }

std::string active_name() { return active().name; }

} // namespace mvi::kern
