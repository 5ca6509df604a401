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

#include <cmath>
#include <cstdint>
#include <vector>

namespace mvi {

// Counter-based keyed streams built on splitmix64. Every random draw in the
// project is keyed by (seed, purpose, indices...), so results do not depend
// on evaluation order, thread count, or the standard library's distribution
// internals. That is what makes bit-identical reruns possible.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Deterministic stream: state advances through splitmix64 outputs.
class Rng {
public:
    explicit Rng(std::uint64_t key) : state_(splitmix64(key ^ 0x853c49e6748fea9bull)) {}

    /// Derive a substream key; mixing is one-way so substreams do not collide
    /// with the parent sequence.
    static std::uint64_t derive(std::uint64_t key, std::uint64_t a, std::uint64_t b = 0,
                                std::uint64_t c = 0) {
        std::uint64_t h = splitmix64(key ^ 0x2545f4914f6cdd1dull);
        h = splitmix64(h ^ a);
        h = splitmix64(h ^ b);
        h = splitmix64(h ^ c);
        return h;
    }

    std::uint64_t next_u64() {
        state_ = splitmix64(state_);
        return state_;
    }

    /// Uniform in [0, 1) with 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n); n > 0. Rejection-free modulo of a 64-bit
    /// draw; bias is negligible for the small n used here but we use
    /// Lemire-style multiply-shift to keep it exact and branch-light.
    std::uint64_t next_below(std::uint64_t n) {
        // 128-bit multiply keeps the mapping unbiased enough for n << 2^64.
        unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Standard normal via Box-Muller; consumes two uniforms per pair and
    /// caches the second value.
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = next_double();
        double u2 = next_double();
        // Guard the log: next_double() can return exactly 0.
        while (u1 <= 0.0) u1 = next_double();
        double r = std::sqrt(-2.0 * std::log(u1));
        double t = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(t);
        have_spare_ = true;
        return r * std::cos(t);
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

/// Fisher-Yates shuffle driven by an Rng; deterministic for a given key.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.next_below(i));
        std::swap(v[i - 1], v[j]);
    }
}

} // namespace mvi
