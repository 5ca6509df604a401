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

#include "mvi/common.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace mvi {

// Volumes, labels and masks are immutable after construction in practice:
// every producer builds a fresh value and downstream stages only read.

enum class Channel { R1, R2, PD, BAP, SyMVF, MTsat, MTMVI, GenMVI, other };

Channel channel_from_string(const std::string& s);
const char* channel_to_string(Channel c);

struct Shape3 {
    std::size_t nz = 0, ny = 0, nx = 0;
    std::size_t total() const { return nz * ny * nx; }
    bool operator==(const Shape3&) const = default;
};

struct Volume {
    Shape3 shape;
    std::array<double, 3> voxel_mm{1.0, 1.0, 1.0}; // (dz, dy, dx)
    Channel channel = Channel::other;
    std::string channel_label = "other"; // raw header string, kept for other
    std::vector<float> data;             // z-major, then row-major

    float& at(std::size_t z, std::size_t y, std::size_t x) {
        return data[(z * shape.ny + y) * shape.nx + x];
    }
    float at(std::size_t z, std::size_t y, std::size_t x) const {
        return data[(z * shape.ny + y) * shape.nx + x];
    }
    const float* slice(std::size_t z) const { return data.data() + z * shape.ny * shape.nx; }
    float* slice(std::size_t z) { return data.data() + z * shape.ny * shape.nx; }
};

/// Empty volume of the given shape filled with `fill`.
Volume make_volume(Shape3 shape, Channel channel, float fill = 0.0f,
                   std::array<double, 3> voxel_mm = {1.0, 1.0, 1.0});

/// Shape positive, data length matches, all values finite, BAP in [0,1].
void validate_volume(const Volume& v);

struct Mask {
    Shape3 shape;
    std::vector<std::uint8_t> bits;

    bool at(std::size_t z, std::size_t y, std::size_t x) const {
        return bits[(z * shape.ny + y) * shape.nx + x] != 0;
    }
    void set(std::size_t z, std::size_t y, std::size_t x, bool b) {
        bits[(z * shape.ny + y) * shape.nx + x] = b ? 1 : 0;
    }
    std::size_t count() const;
};

Mask make_mask(Shape3 shape, bool fill = false);
Mask mask_and(const Mask& a, const Mask& b);
Mask mask_or(const Mask& a, const Mask& b);
Mask mask_sub(const Mask& a, const Mask& b); // a & !b
bool mask_subset(const Mask& inner, const Mask& outer);
bool mask_disjoint(const Mask& a, const Mask& b);

struct LabelVolume {
    Shape3 shape;
    std::array<double, 3> voxel_mm{1.0, 1.0, 1.0};
    std::vector<std::int32_t> labels;
    std::map<std::int32_t, std::string> legend; // 0 = background/CSF

    std::int32_t at(std::size_t z, std::size_t y, std::size_t x) const {
        return labels[(z * shape.ny + y) * shape.nx + x];
    }
};

/// Every nonzero label value must appear in the legend.
void validate_labels(const LabelVolume& lv);

/// Bit set exactly where the voxel label is in `wanted`; all requested
/// labels must exist in the legend.
Mask mask_from_labels(const LabelVolume& lv, const std::set<std::int32_t>& wanted);

struct Subject {
    std::string id;
    std::map<Channel, Volume> volumes;
    LabelVolume labels;

    const Volume& channel(Channel c) const;
};

/// All volumes plus labels must share one shape and voxel size.
void validate_subject(const Subject& s);

// float64 accumulation regardless of storage dtype; the scaling constant
// downstream needs 1e-6 relative stability.
double mean_over_mask(const Volume& v, const Mask& m);
double sum_over_mask(const Volume& v, const Mask& m);

Volume scaled(const Volume& v, double factor, Channel out_channel);

} // namespace mvi
