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
#include "mvi/patch/patching.hpp"

#include "mvi/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

namespace mvi::patch {
namespace {

std::size_t count_brain(const Mask& brain, std::size_t z, std::size_t row0,
                        std::size_t col0, std::size_t n) {
    std::size_t c = 0;
    for (std::size_t y = row0; y < row0 + n; ++y)
        for (std::size_t x = col0; x < col0 + n; ++x) c += brain.at(z, y, x) ? 1 : 0;
    return c;
}

Patch cut_patch(const Subject& s, const std::string& id, std::size_t z,
                std::size_t row0, std::size_t col0, std::size_t n, float frac) {
    Patch p;
    p.prov = Provenance{id, z, row0, col0};
    p.brain_fraction = frac;
    for (int pc = 0; pc < kNumChannels; ++pc) {
        const Volume& v = s.channel(patch_channel_source(pc));
        auto& buf = p.native[static_cast<std::size_t>(pc)];
        buf.resize(n * n);
        for (std::size_t y = 0; y < n; ++y)
            for (std::size_t x = 0; x < n; ++x)
                buf[y * n + x] = v.at(z, row0 + y, col0 + x);
    }
    return p;
}

void check_dims(const Subject& s, const SamplerConfig& cfg) {
    const Shape3 sh = s.volumes.begin()->second.shape;
    require(sh.ny >= static_cast<std::size_t>(cfg.patch_native) &&
                sh.nx >= static_cast<std::size_t>(cfg.patch_native),
            "slice dims must be at least ", cfg.patch_native);
}

// Per-axis bilinear taps for the fixed 4x upsample.
struct UpTap {
    int i0, i1;
    float w0, w1;
};

std::vector<UpTap> up_taps(int n) {
    std::vector<UpTap> taps(static_cast<std::size_t>(4 * n));
    for (int j = 0; j < 4 * n; ++j) {
        const double c = (j + 0.5) / 4.0 - 0.5;
        int i0 = static_cast<int>(std::floor(c));
        const double f = c - i0;
        int i1 = i0 + 1;
        i0 = std::clamp(i0, 0, n - 1);
        i1 = std::clamp(i1, 0, n - 1);
        taps[static_cast<std::size_t>(j)] =
            UpTap{i0, i1, static_cast<float>(1.0 - f), static_cast<float>(f)};
    }
    return taps;
}

} // namespace

Channel patch_channel_source(int pc) {
    switch (pc) {
        case kR1: return Channel::R1;
        case kR2: return Channel::R2;
        case kPd: return Channel::PD;
        case kSymvf: return Channel::SyMVF;
        case kMtmvi: return Channel::MTMVI;
    }
    fail("bad patch channel index ", pc);
}

void validate_sampler(const SamplerConfig& cfg) {
    require(cfg.patch_native > 0, "patch_native must be positive");
    require(cfg.patch_resized == 4 * cfg.patch_native,
            "patch_resized must equal 4 * patch_native");
    require(cfg.test_stride >= 1, "test stride must be >= 1");
    require(cfg.per_subject_target > 0, "per_subject_target must be positive");
}

PatchSet sample_training_patches(const Subject& s, const Mask& brain,
                                 const SamplerConfig& cfg) {
    validate_sampler(cfg);
    check_dims(s, cfg);
    const Shape3 sh = s.volumes.begin()->second.shape;
    require(brain.shape == sh, "brain mask shape mismatch");
    require(brain.count() > 0, "no retainable windows: brain mask is empty");

    const std::size_t n = static_cast<std::size_t>(cfg.patch_native);
    const std::size_t half = n * n / 2;
    const std::size_t max_row = sh.ny - n;
    const std::size_t max_col = sh.nx - n;

    PatchSet ps;
    ps.cfg = cfg;
    ps.subject_shape = sh;
    Rng rng(Rng::derive(cfg.seed, 0x53414d50u /*"SAMP"*/, fnv1a64(s.id)));
    const std::size_t target = static_cast<std::size_t>(cfg.per_subject_target);
    const std::size_t budget = 50 * target;
    for (std::size_t draw = 0; draw < budget && ps.patches.size() < target; ++draw) {
        const std::size_t z = rng.next_below(sh.nz);
        const std::size_t row0 = rng.next_below(max_row + 1);
        const std::size_t col0 = rng.next_below(max_col + 1);
        const std::size_t c = count_brain(brain, z, row0, col0, n);
        if (c < half) continue;
        ps.patches.push_back(cut_patch(s, s.id, z, row0, col0, n,
                                       static_cast<float>(c) / static_cast<float>(n * n)));
    }
    require(!ps.patches.empty(), "no retainable windows for subject ", s.id);
    return ps;
}

std::vector<std::size_t> stride_grid_positions(std::size_t extent, std::size_t window,
                                               std::size_t stride) {
    std::vector<std::size_t> pos;
    for (std::size_t p = 0; p + window <= extent; p += stride) pos.push_back(p);
    return pos;
}

std::vector<std::size_t> stride_positions_clamped(std::size_t extent, std::size_t window,
                                                  std::size_t stride) {
    std::vector<std::size_t> pos = stride_grid_positions(extent, window, stride);
    const std::size_t last = extent - window;
    if (pos.empty() || pos.back() != last) pos.push_back(last);
    return pos;
}

PatchSet tile_test_patches(const Subject& s, const Mask& brain, const SamplerConfig& cfg) {
    validate_sampler(cfg);
    check_dims(s, cfg);
    const Shape3 sh = s.volumes.begin()->second.shape;
    require(brain.shape == sh, "brain mask shape mismatch");

    const std::size_t n = static_cast<std::size_t>(cfg.patch_native);
    const std::size_t half = n * n / 2;
    const auto rows = stride_positions_clamped(sh.ny, n, static_cast<std::size_t>(cfg.test_stride));
    const auto cols = stride_positions_clamped(sh.nx, n, static_cast<std::size_t>(cfg.test_stride));

    PatchSet ps;
    ps.cfg = cfg;
    ps.subject_shape = sh;
    for (std::size_t z = 0; z < sh.nz; ++z)
        for (const std::size_t r : rows)
            for (const std::size_t c : cols) {
                const std::size_t cnt = count_brain(brain, z, r, c, n);
                if (cnt < half) continue;
                ps.patches.push_back(cut_patch(s, s.id, z, r, c, n,
                                               static_cast<float>(cnt) /
                                                   static_cast<float>(n * n)));
            }
    return ps;
}

void resize_up(const float* img, int n, float* out) {
    const auto taps = up_taps(n);
    const int m = 4 * n;
    // Rows first into a scratch of n x m, then columns.
    std::vector<float> tmp(static_cast<std::size_t>(n) * static_cast<std::size_t>(m));
    for (int y = 0; y < n; ++y) {
        const float* src = img + static_cast<std::size_t>(y) * n;
        float* dst = tmp.data() + static_cast<std::size_t>(y) * m;
        for (int j = 0; j < m; ++j) {
            const UpTap& t = taps[static_cast<std::size_t>(j)];
            dst[j] = t.w0 * src[t.i0] + t.w1 * src[t.i1];
        }
    }
    for (int j = 0; j < m; ++j) {
        const UpTap& t = taps[static_cast<std::size_t>(j)];
        for (int x = 0; x < m; ++x)
            out[static_cast<std::size_t>(j) * m + x] =
                t.w0 * tmp[static_cast<std::size_t>(t.i0) * m + x] +
                t.w1 * tmp[static_cast<std::size_t>(t.i1) * m + x];
    }
}

void reduce_to_native(const float* img, int n_out, float* out) {
    static constexpr float w[4] = {-0.25f, 0.75f, 0.75f, -0.25f};
    const int m = 4 * n_out;
    // Row axis first into n_out x m, then the column axis.
    std::vector<float> tmp(static_cast<std::size_t>(n_out) * static_cast<std::size_t>(m));
    for (int i = 0; i < n_out; ++i) {
        for (int x = 0; x < m; ++x) {
            float acc = 0.0f;
            for (int a = 0; a < 4; ++a)
                acc += w[a] * img[static_cast<std::size_t>(4 * i + a) * m + x];
            tmp[static_cast<std::size_t>(i) * m + x] = acc;
        }
    }
    for (int i = 0; i < n_out; ++i) {
        const float* src = tmp.data() + static_cast<std::size_t>(i) * m;
        for (int j = 0; j < n_out; ++j) {
            float acc = 0.0f;
            for (int a = 0; a < 4; ++a) acc += w[a] * src[4 * j + a];
            out[static_cast<std::size_t>(i) * n_out + j] = acc;
        }
    }
}

Volume reassemble(const std::vector<std::pair<Provenance, std::vector<float>>>& outputs,
                  Shape3 target_shape, const SamplerConfig& cfg) {
    validate_sampler(cfg);
    const std::size_t n = static_cast<std::size_t>(cfg.patch_native);
    const std::size_t m = static_cast<std::size_t>(cfg.patch_resized);
    Volume vol = make_volume(target_shape, Channel::GenMVI);
    std::vector<double> acc(target_shape.total(), 0.0);
    std::vector<std::uint32_t> hits(target_shape.total(), 0);

    // Canonical accumulation order (sorted by provenance) makes the result
    // independent of the order patches arrive in.
    std::vector<std::size_t> order(outputs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const Provenance& pa = outputs[a].first;
        const Provenance& pb = outputs[b].first;
        return std::tie(pa.z, pa.row0, pa.col0) < std::tie(pb.z, pb.row0, pb.col0);
    });

    std::vector<float> native(n * n);
    for (const std::size_t oi : order) {
        const Provenance& pv = outputs[oi].first;
        const std::vector<float>& big = outputs[oi].second;
        require(big.size() == m * m, "output patch is not ", m, "x", m);
        require(pv.z < target_shape.nz && pv.row0 + n <= target_shape.ny &&
                    pv.col0 + n <= target_shape.nx,
                "patch provenance outside target shape");
        reduce_to_native(big.data(), static_cast<int>(n), native.data());
        for (std::size_t y = 0; y < n; ++y)
            for (std::size_t x = 0; x < n; ++x) {
                const std::size_t idx =
                    (pv.z * target_shape.ny + pv.row0 + y) * target_shape.nx + pv.col0 + x;
                acc[idx] += static_cast<double>(native[y * n + x]);
                hits[idx] += 1;
            }
    }
    for (std::size_t i = 0; i < acc.size(); ++i)
        vol.data[i] = hits[i] ? static_cast<float>(acc[i] / hits[i]) : 0.0f;
    return vol;
}

std::vector<float> resize_channel(const Patch& p, int pc, const SamplerConfig& cfg) {
    const std::size_t m = static_cast<std::size_t>(cfg.patch_resized);
    std::vector<float> out(m * m);
    resize_up(p.native[static_cast<std::size_t>(pc)].data(), cfg.patch_native, out.data());
    return out;
}

} // namespace mvi::patch
