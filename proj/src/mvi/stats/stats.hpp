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
#include "mvi/prep/preprocess.hpp"

#include <span>
#include <string>
#include <vector>

namespace mvi::stats {

/// Sample Pearson correlation, float64. Needs length >= 2 and nonzero
/// variance on both sides.
double pearson(std::span<const double> x, std::span<const double> y);

struct WilcoxonResult {
    double w_plus = 0, w_minus = 0;
    double w = 0;          // min(W+, W-)
    double p = 1;          // two-sided
    std::size_t n = 0;     // pairs after dropping zero differences
    bool exact = false;    // exact enumeration (DP) vs normal approximation
};

/// Paired signed-rank test on a - b. Zero differences are dropped; average
/// ranks on ties. Exact p by dynamic programming over the signed-rank sum
/// distribution when n <= 30 and there are no ties; otherwise a normal
/// approximation with tie and continuity corrections. Needs >= 5 nonzero
/// differences.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

/// R-7 percentile (linear interpolation between order statistics).
double percentile(std::vector<double> values, double p);
double median(std::vector<double> values);

struct BoxStats {
    double median = 0, q1 = 0, q3 = 0;
    double lo = 0, hi = 0; // Tukey whiskers (1.5 IQR, clipped to the data)
    std::size_t n = 0;
};
BoxStats box_stats(std::vector<double> values);

struct RoiStatRow {
    std::string subject_id;
    std::string roi_name;
    std::string region; // cGM, sGM, WM
    double mean_mtmvi = 0, mean_symvf = 0, mean_genmvi = 0;
    double delta_sy = 0, delta_gen = 0;
};

/// One row per local ROI: float64 means of the three maps plus the absolute
/// differences against MTMVI. Empty ROIs were already dropped upstream.
std::vector<RoiStatRow> roi_means(const std::string& subject_id, const prep::RoiSet& rois,
                                  const Volume& mtmvi, const Volume& symvf,
                                  const Volume& genmvi);

enum class Pairing { pooled, per_subject };

struct MetricSummary {
    double median = 0, min = 0, max = 0;
};

struct RegionTable {
    std::string region; // cGM, sGM, WM, WB
    MetricSummary mtmvi, symvf, genmvi, delta_sy, delta_gen;
    double p_delta = 1;      // Wilcoxon, delta_sy vs delta_gen
    bool p_degenerate = false; // all paired differences were zero
    std::size_t n_rows = 0;
};

struct RoiAnalysis {
    std::vector<RegionTable> regions; // cGM, sGM, WM, WB
    double pooled_r_symvf = 0;  // Pearson r(MTMVI, SyMVF) over all rows
    double pooled_r_genmvi = 0; // Pearson r(MTMVI, GenMVI) over all rows
    std::vector<RoiStatRow> rows;
};

RoiAnalysis run_roi_analysis(const std::vector<RoiStatRow>& rows, Pairing pairing);

struct PixelCorrRow {
    std::string subject_id;
    std::string roi; // cGM, sGM, WM, WB, CC
    std::size_t n_pixels = 0;
    double r_symvf = 0, r_genmvi = 0;
};

struct SubjectMaps {
    std::string subject_id;
    const prep::RoiSet* rois = nullptr;
    const Volume* mtmvi = nullptr;
    const Volume* symvf = nullptr;
    const Volume* genmvi = nullptr;
};

struct RoiBox {
    std::string roi;
    BoxStats symvf, genmvi;
    double p = 1;
    bool degenerate = false; // identical r columns -> "no difference"
};

struct PixelAnalysis {
    std::vector<PixelCorrRow> rows;
    std::vector<RoiBox> boxes; // cGM, sGM, WM, WB, CC
};

/// Pixel-wise correlation against MTMVI per subject and tissue ROI, with a
/// paired Wilcoxon over the per-subject correlation columns.
PixelAnalysis run_pixel_analysis(const std::vector<SubjectMaps>& subjects);

} // namespace mvi::stats
