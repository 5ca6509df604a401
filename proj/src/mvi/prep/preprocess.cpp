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
#include "mvi/prep/preprocess.hpp"

#include "mvi/phantom/phantom.hpp"

#include <algorithm>
#include <cmath>

namespace mvi::prep {
namespace {

constexpr double kPi = 3.14159265358979323846;

/// In-plane centroid of a mask over all slices; falls back to the image
/// center when the mask is empty.
std::pair<double, double> centroid(const Mask& m) {
    double sy = 0, sx = 0, n = 0;
    for (std::size_t z = 0; z < m.shape.nz; ++z)
        for (std::size_t y = 0; y < m.shape.ny; ++y)
            for (std::size_t x = 0; x < m.shape.nx; ++x)
                if (m.at(z, y, x)) {
                    sy += static_cast<double>(y);
                    sx += static_cast<double>(x);
                    n += 1.0;
                }
    if (n == 0)
        return {0.5 * static_cast<double>(m.shape.ny), 0.5 * static_cast<double>(m.shape.nx)};
    return {sy / n, sx / n};
}

/// Split a mask into `n_sectors` angular bins around its centroid.
std::vector<Mask> angular_sectors(const Mask& m, int n_sectors) {
    const auto [cy, cx] = centroid(m);
    std::vector<Mask> out;
    out.reserve(n_sectors);
    for (int s = 0; s < n_sectors; ++s) out.push_back(make_mask(m.shape));
    for (std::size_t z = 0; z < m.shape.nz; ++z)
        for (std::size_t y = 0; y < m.shape.ny; ++y)
            for (std::size_t x = 0; x < m.shape.nx; ++x)
                if (m.at(z, y, x)) {
                    const double a = std::atan2(static_cast<double>(y) - cy,
                                                static_cast<double>(x) - cx);
                    int s = static_cast<int>(std::floor((a + kPi) / (2.0 * kPi) * n_sectors));
                    s = std::clamp(s, 0, n_sectors - 1);
                    out[static_cast<std::size_t>(s)].set(z, y, x, true);
                }
    return out;
}

/// 6-connected 3-D components, first-seen order (deterministic).
std::vector<Mask> components(const Mask& m) {
    const std::size_t nz = m.shape.nz, ny = m.shape.ny, nx = m.shape.nx;
    std::vector<std::int32_t> comp(m.bits.size(), -1);
    std::vector<Mask> out;
    std::vector<std::size_t> stack;
    auto lin = [&](std::size_t z, std::size_t y, std::size_t x) {
        return (z * ny + y) * nx + x;
    };
    for (std::size_t z = 0; z < nz; ++z)
        for (std::size_t y = 0; y < ny; ++y)
            for (std::size_t x = 0; x < nx; ++x) {
                const std::size_t i = lin(z, y, x);
                if (!m.bits[i] || comp[i] >= 0) continue;
                const std::int32_t id = static_cast<std::int32_t>(out.size());
                out.push_back(make_mask(m.shape));
                comp[i] = id;
                stack.assign(1, i);
                while (!stack.empty()) {
                    const std::size_t cur = stack.back();
                    stack.pop_back();
                    out[static_cast<std::size_t>(id)].bits[cur] = 1;
                    const std::size_t cz = cur / (ny * nx);
                    const std::size_t cy = (cur / nx) % ny;
                    const std::size_t cx = cur % nx;
                    const std::ptrdiff_t d[6][3] = {{1, 0, 0},  {-1, 0, 0}, {0, 1, 0},
                                                    {0, -1, 0}, {0, 0, 1},  {0, 0, -1}};
                    for (const auto& dd : d) {
                        const std::ptrdiff_t zz = static_cast<std::ptrdiff_t>(cz) + dd[0];
                        const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(cy) + dd[1];
                        const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(cx) + dd[2];
                        if (zz < 0 || yy < 0 || xx < 0 || zz >= static_cast<std::ptrdiff_t>(nz) ||
                            yy >= static_cast<std::ptrdiff_t>(ny) ||
                            xx >= static_cast<std::ptrdiff_t>(nx))
                            continue;
                        const std::size_t j = lin(static_cast<std::size_t>(zz),
                                                  static_cast<std::size_t>(yy),
                                                  static_cast<std::size_t>(xx));
                        if (m.bits[j] && comp[j] < 0) {
                            comp[j] = id;
                            stack.push_back(j);
                        }
                    }
                }
            }
    return out;
}

void add_local_rois(RoiSet& rs, std::vector<Mask> parts, const std::string& prefix,
                    const std::string& region) {
    for (std::size_t i = 0; i < parts.size(); ++i) {
        const std::string name = prefix + std::to_string(i);
        if (parts[i].count() < kMinRoiVoxels) {
            rs.dropped_rois.push_back(name);
            continue;
        }
        rs.local_rois.push_back(LocalRoi{name, region, std::move(parts[i])});
    }
}

} // namespace

Mask brain_mask(const Volume& bap) {
    Mask m = make_mask(bap.shape);
    for (std::size_t i = 0; i < bap.data.size(); ++i) {
        const float p = bap.data[i];
        require(p >= 0.0f && p <= 1.0f, "brain probability ", p, " outside [0,1]");
        m.bits[i] = p > 0.95f ? 1 : 0;
    }
    return m;
}

Mask erode8(const Mask& m) {
    Mask out = make_mask(m.shape);
    const std::size_t ny = m.shape.ny, nx = m.shape.nx;
    if (ny < 3 || nx < 3) return out; // no interior, nothing survives
    for (std::size_t z = 0; z < m.shape.nz; ++z) {
        for (std::size_t y = 1; y + 1 < ny; ++y) {
            for (std::size_t x = 1; x + 1 < nx; ++x) {
                bool keep = true;
                for (std::size_t yy = y - 1; yy <= y + 1 && keep; ++yy)
                    for (std::size_t xx = x - 1; xx <= x + 1 && keep; ++xx)
                        keep = m.at(z, yy, xx);
                if (keep) out.set(z, y, x, true);
            }
        }
    }
    return out;
}

RoiSet build_roiset(const LabelVolume& labels, const Mask& brain) {
    require(labels.shape == brain.shape, "label/brain shape mismatch");
    for (const char* want : {"cGM", "sGM", "WM", "CC"}) {
        bool found = false;
        for (const auto& [lab, name] : labels.legend) {
            (void)lab;
            if (name == want) found = true;
        }
        require(found, "legend lacks entry '", want, "'");
    }

    using namespace mvi::phantom;
    RoiSet rs;
    const Mask cgm_raw = mask_and(mask_from_labels(labels, {kCorticalGm}), brain);
    const Mask sgm_raw = mask_and(mask_from_labels(labels, {kSubcorticalGm}), brain);
    // The WM tissue mask covers plain WM plus the CC parcels, mirroring how
    // the callosal parcels belong to the WM group before merging.
    const Mask wm_raw = mask_and(mask_from_labels(labels, {kWhiteMatter, kCorpusCallosum}), brain);

    rs.roi_cgm = erode8(cgm_raw);
    rs.roi_sgm = erode8(sgm_raw);
    rs.roi_wm = erode8(wm_raw);
    rs.roi_wb = mask_or(mask_or(rs.roi_cgm, rs.roi_sgm), rs.roi_wm);
    rs.roi_cc = mask_and(mask_from_labels(labels, {kCorpusCallosum}), rs.roi_wm);
    rs.erosion_applied = true;

    add_local_rois(rs, angular_sectors(rs.roi_cgm, 8), "cGM_sec", "cGM");
    add_local_rois(rs, components(rs.roi_sgm), "sGM_comp", "sGM");
    // Plain-WM sectors exclude the CC, which enters as its own local ROI.
    const Mask wm_only = mask_sub(rs.roi_wm, rs.roi_cc);
    add_local_rois(rs, angular_sectors(wm_only, 8), "WM_sec", "WM");
    std::vector<Mask> cc;
    cc.push_back(rs.roi_cc);
    add_local_rois(rs, std::move(cc), "CC_merged", "WM");
    return rs;
}

std::pair<Volume, ScaleResult> scale_mtsat(const Volume& mtsat, const Volume& symvf,
                                           const Mask& roi_wm) {
    require(roi_wm.count() > 0, "scale_mtsat: empty WM ROI");
    ScaleResult sr;
    sr.wm_mean_symvf = mean_over_mask(symvf, roi_wm);
    sr.wm_mean_mtsat = mean_over_mask(mtsat, roi_wm);
    require(sr.wm_mean_mtsat > 0.0, "scale_mtsat: WM mean of MTsat is ", sr.wm_mean_mtsat,
            ", must be positive");
    sr.c = sr.wm_mean_symvf / sr.wm_mean_mtsat;
    Volume mtmvi = scaled(mtsat, sr.c, Channel::MTMVI);
    const double check = mean_over_mask(mtmvi, roi_wm);
    require(std::abs(check - sr.wm_mean_symvf) <=
                1e-6 * std::max(std::abs(sr.wm_mean_symvf), 1e-30),
            "scale_mtsat post-condition violated: WM means differ by ",
            check - sr.wm_mean_symvf);
    return {std::move(mtmvi), sr};
}

} // namespace mvi::prep
