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
#include "mvi/core/volume.hpp"

#include <cmath>

namespace mvi {

Channel channel_from_string(const std::string& s) {
    if (s == "R1") return Channel::R1;
    if (s == "R2") return Channel::R2;
    if (s == "PD") return Channel::PD;
    if (s == "BAP") return Channel::BAP;
    if (s == "SyMVF") return Channel::SyMVF;
    if (s == "MTsat") return Channel::MTsat;
    if (s == "MTMVI") return Channel::MTMVI;
    if (s == "GenMVI") return Channel::GenMVI;
    return Channel::other;
}

const char* channel_to_string(Channel c) {
    switch (c) {
        case Channel::R1: return "R1";
        case Channel::R2: return "R2";
        case Channel::PD: return "PD";
        case Channel::BAP: return "BAP";
        case Channel::SyMVF: return "SyMVF";
        case Channel::MTsat: return "MTsat";
        case Channel::MTMVI: return "MTMVI";
        case Channel::GenMVI: return "GenMVI";
        case Channel::other: return "other";
    }
    return "other";
}

Volume make_volume(Shape3 shape, Channel channel, float fill,
                   std::array<double, 3> voxel_mm) {
    require(shape.nz > 0 && shape.ny > 0 && shape.nx > 0,
            "volume shape must be positive, got [", shape.nz, ",", shape.ny, ",", shape.nx, "]");
    Volume v;
    v.shape = shape;
    v.voxel_mm = voxel_mm;
    v.channel = channel;
    v.channel_label = channel_to_string(channel);
    v.data.assign(shape.total(), fill);
    return v;
}

void validate_volume(const Volume& v) {
    require(v.shape.nz > 0 && v.shape.ny > 0 && v.shape.nx > 0, "volume shape must be positive");
    require(v.data.size() == v.shape.total(), "volume data length ", v.data.size(),
            " does not match shape product ", v.shape.total());
    for (double d : v.voxel_mm) require(d > 0.0, "voxel size must be positive");
    const bool is_bap = v.channel == Channel::BAP;
    for (std::size_t i = 0; i < v.data.size(); ++i) {
        const float x = v.data[i];
        require(std::isfinite(x), "non-finite value at linear index ", i, " in channel ",
                v.channel_label);
        if (is_bap)
            require(x >= 0.0f && x <= 1.0f, "BAP value ", x, " outside [0,1] at index ", i);
    }
}

Mask make_mask(Shape3 shape, bool fill) {
    Mask m;
    m.shape = shape;
    m.bits.assign(shape.total(), fill ? 1 : 0);
    return m;
}

std::size_t Mask::count() const {
    std::size_t n = 0;
    for (auto b : bits) n += b;
    return n;
}

Mask mask_and(const Mask& a, const Mask& b) {
    require(a.shape == b.shape, "mask shape mismatch");
    Mask out = make_mask(a.shape);
    for (std::size_t i = 0; i < out.bits.size(); ++i) out.bits[i] = a.bits[i] & b.bits[i];
    return out;
}

Mask mask_or(const Mask& a, const Mask& b) {
    require(a.shape == b.shape, "mask shape mismatch");
    Mask out = make_mask(a.shape);
    for (std::size_t i = 0; i < out.bits.size(); ++i) out.bits[i] = a.bits[i] | b.bits[i];
    return out;
}

Mask mask_sub(const Mask& a, const Mask& b) {
    require(a.shape == b.shape, "mask shape mismatch");
    Mask out = make_mask(a.shape);
    for (std::size_t i = 0; i < out.bits.size(); ++i)
        out.bits[i] = static_cast<std::uint8_t>(a.bits[i] & (b.bits[i] ^ 1u));
    return out;
}

bool mask_subset(const Mask& inner, const Mask& outer) {
    require(inner.shape == outer.shape, "mask shape mismatch");
    for (std::size_t i = 0; i < inner.bits.size(); ++i)
        if (inner.bits[i] && !outer.bits[i]) return false;
    return true;
}

bool mask_disjoint(const Mask& a, const Mask& b) {
    require(a.shape == b.shape, "mask shape mismatch");
    for (std::size_t i = 0; i < a.bits.size(); ++i)
        if (a.bits[i] && b.bits[i]) return false;
    return true;
}

void validate_labels(const LabelVolume& lv) {
    require(lv.shape.total() == lv.labels.size(), "label volume length mismatch");
    for (std::size_t i = 0; i < lv.labels.size(); ++i) {
        const auto l = lv.labels[i];
        require(l >= 0, "negative label at index ", i);
        if (l != 0)
            require(lv.legend.count(l) != 0, "label ", l, " missing from legend");
    }
}

Mask mask_from_labels(const LabelVolume& lv, const std::set<std::int32_t>& wanted) {
    for (auto l : wanted)
        require(lv.legend.count(l) != 0 || l == 0, "requested label ", l, " not in legend");
    Mask m = make_mask(lv.shape);
    for (std::size_t i = 0; i < lv.labels.size(); ++i)
        m.bits[i] = wanted.count(lv.labels[i]) ? 1 : 0;
    return m;
}

const Volume& Subject::channel(Channel c) const {
    auto it = volumes.find(c);
    require(it != volumes.end(), "subject ", id, " lacks channel ", channel_to_string(c));
    return it->second;
}

void validate_subject(const Subject& s) {
    require(!s.volumes.empty(), "subject ", s.id, " has no volumes");
    const auto& first = s.volumes.begin()->second;
    for (const auto& [c, v] : s.volumes) {
        (void)c;
        validate_volume(v);
        require(v.shape == first.shape, "subject ", s.id, " channel shapes differ");
        require(v.voxel_mm == first.voxel_mm, "subject ", s.id, " voxel sizes differ");
    }
    require(s.labels.shape == first.shape, "subject ", s.id, " label shape differs");
    validate_labels(s.labels);
}

double sum_over_mask(const Volume& v, const Mask& m) {
    require(v.shape == m.shape, "volume/mask shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < v.data.size(); ++i)
        if (m.bits[i]) acc += static_cast<double>(v.data[i]);
    return acc;
}

double mean_over_mask(const Volume& v, const Mask& m) {
    const std::size_t n = m.count();
    require(n > 0, "mean over empty mask");
    return sum_over_mask(v, m) / static_cast<double>(n);
}

Volume scaled(const Volume& v, double factor, Channel out_channel) {
    Volume out = v;
    out.channel = out_channel;
    out.channel_label = channel_to_string(out_channel);
    for (auto& x : out.data) x = static_cast<float>(static_cast<double>(x) * factor);
    return out;
}

} // namespace mvi
