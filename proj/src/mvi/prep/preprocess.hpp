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

namespace mvi::prep {

// ROI morphology and the MT scaling step. All morphology is in-plane
// (per-slice): the acquisitions this models are thick-slice with gaps and
// every later stage works per slice as well.

/// Strict threshold: bit set iff bap > 0.95. Values must lie in [0,1].
Mask brain_mask(const Volume& bap);

/// One in-plane erosion with the eight-connected rule: a voxel survives iff
/// it and all 8 in-plane neighbors are set. Out-of-image counts as unset, so
/// border voxels never survive.
Mask erode8(const Mask& m);

struct LocalRoi {
    std::string name;
    std::string region; // "cGM", "sGM", or "WM" for the grouped analysis
    Mask mask;
};

struct RoiSet {
    std::vector<LocalRoi> local_rois;
    Mask roi_cgm, roi_sgm, roi_wm, roi_wb, roi_cc;
    bool erosion_applied = false;
    std::vector<std::string> dropped_rois; // fell below the size floor
};

// Local ROIs smaller than this after erosion-intersection are dropped from
// per-ROI statistics (and logged); mirrors the cleanup of tiny parcels.
inline constexpr std::size_t kMinRoiVoxels = 5;

/// Tissue masks from labels AND brain; cGM/sGM/WM eroded once; WB is their
/// union; CC intersected with eroded WM. Local ROIs are angular sectors of
/// cGM/WM and connected components of sGM, all within their eroded parent.
RoiSet build_roiset(const LabelVolume& labels, const Mask& brain);

struct ScaleResult {
    double c = 0;              // wm_mean_symvf / wm_mean_mtsat
    double wm_mean_symvf = 0;
    double wm_mean_mtsat = 0;
};

/// MTMVI = c * MTsat with c chosen so the WM means of MTMVI and SyMVF agree
/// (checked to 1e-6 relative).
std::pair<Volume, ScaleResult> scale_mtsat(const Volume& mtsat, const Volume& symvf,
                                           const Mask& roi_wm);

} // namespace mvi::prep
