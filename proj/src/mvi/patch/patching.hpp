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

#include "mvi/core/volume.hpp"

#include <array>

namespace mvi::patch {

// Patch channels in fixed order; the first four feed the network, the last
// is the training target and is never perturbed.
enum PatchChannel : int { kR1 = 0, kR2, kPd, kSymvf, kMtmvi, kNumChannels };
Channel patch_channel_source(int pc);

struct SamplerConfig {
    int patch_native = 32;
    int patch_resized = 128;       // must equal 4 * patch_native
    int per_subject_target = 600;  // desk default; full scale ~6000
    int test_stride = 5;
    std::uint64_t seed = 1;
};

void validate_sampler(const SamplerConfig& cfg);

struct Provenance {
    std::string subject_id;
    std::size_t z = 0, row0 = 0, col0 = 0; // native 32x32 footprint
};

/// Channels are stored at the native footprint; resize_channel() produces
/// the 128x128 view consumed by the network.
struct Patch {
    Provenance prov;
    float brain_fraction = 0;
    std::array<std::vector<float>, kNumChannels> native;
};

struct PatchSet {
    SamplerConfig cfg;
    Shape3 subject_shape;
    std::vector<Patch> patches;
};

/// Uniform random windows; a draw is retained iff at least half of its
/// native pixels are brain. Stops at per_subject_target retained patches or
/// after a draw budget of 50x the target. With replacement; duplicates stay.
PatchSet sample_training_patches(const Subject& s, const Mask& brain,
                                 const SamplerConfig& cfg);

/// Regular grid at test_stride plus final positions clamped to the far
/// edges, same retention rule.
PatchSet tile_test_patches(const Subject& s, const Mask& brain, const SamplerConfig& cfg);

/// Grid positions {0, stride, ...} with full window containment.
std::vector<std::size_t> stride_grid_positions(std::size_t extent, std::size_t window,
                                               std::size_t stride);
/// Grid plus the clamped far-edge position when the grid stops short.
std::vector<std::size_t> stride_positions_clamped(std::size_t extent, std::size_t window,
                                                  std::size_t stride);

/// Bilinear 4x upsample with pixel-center mapping out -> (out+0.5)/4 - 0.5,
/// edges clamped. `n` is the native edge length; output is 4n x 4n.
void resize_up(const float* img, int n, float* out);

/// Exact left inverse of resize_up: per-axis weights (-1/4, 3/4, 3/4, -1/4)
/// over each 4-sample block. Weights sum to 1, so constants are preserved,
/// and resize_up followed by reduce_to_native returns the input to float
/// rounding error, clamped edge rows included.
void reduce_to_native(const float* img, int n_out, float* out);

/// Accumulates 128x128 outputs back onto the subject grid: reduce to the
/// native footprint, then average overlapping contributions per voxel
/// (float64 accumulators, canonical provenance order). Uncovered voxels are
/// zero.
Volume reassemble(const std::vector<std::pair<Provenance, std::vector<float>>>& outputs,
                  Shape3 target_shape, const SamplerConfig& cfg);

/// 128x128 view of one stored channel.
std::vector<float> resize_channel(const Patch& p, int pc, const SamplerConfig& cfg);

} // namespace mvi::patch
