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

#include <filesystem>
#include <optional>

#include <json.hpp>

namespace mvi::phantom {

// Synthetic pre-registered subjects with a known myelin index. The true
// index carries a neighborhood-dependent term (distance to the gray-matter
// boundary inside white matter), which a strictly pixel-wise map cannot
// reproduce by construction. Tissue labels:
//   0 background/CSF, 1 cGM, 2 sGM, 3 WM, 4 CC
inline constexpr std::int32_t kBackground = 0;
inline constexpr std::int32_t kCorticalGm = 1;
inline constexpr std::int32_t kSubcorticalGm = 2;
inline constexpr std::int32_t kWhiteMatter = 3;
inline constexpr std::int32_t kCorpusCallosum = 4;

const std::map<std::int32_t, std::string>& tissue_legend();

struct TissueParams {
    double r1_mean = 0, r1_sd = 0;
    double r2_mean = 0, r2_sd = 0;
    double pd_mean = 0, pd_sd = 0;
    double mvi_base = 0; // noise-free myelin index level of this tissue
};

struct PhantomConfig {
    int n_subjects = 8;
    Shape3 shape{12, 96, 96};
    std::uint64_t seed = 1;
    std::map<std::int32_t, TissueParams> tissue_params; // keyed by label
    double noise_sd_mtmvi = 0.02;
    double context_gain = 0.25;     // weight of the neighborhood myelin term
    double geometry_jitter = 0.05;  // per-subject shape perturbation
};

void validate_config(const PhantomConfig& cfg);
void to_json(nlohmann::json& j, const PhantomConfig& cfg);
void from_json(const nlohmann::json& j, PhantomConfig& cfg);

struct GroundTruth {
    Volume mvi_true;    // >= 0 everywhere, 0 on background
    LabelVolume tissue;
};

/// Deterministic: same (cfg, index) gives bit-identical output. Each subject
/// draws from an independent counter-based substream of (seed, index).
std::pair<Subject, GroundTruth> generate_subject(const PhantomConfig& cfg, int index);

/// Pixel-wise stand-in for a lookup-table myelin fraction: a fixed smooth
/// closed-form map of (R1, R2, PD), strictly increasing in R1 and R2,
/// decreasing in PD, with range inside [0, 0.6]. Carries zero neighborhood
/// information by construction.
float symvf_standin(float r1, float r2, float pd);

struct DatasetIndex {
    std::filesystem::path root;
    std::vector<std::string> subject_ids;
    std::map<std::int32_t, std::string> legend;
    PhantomConfig config;
};

/// Generates all subjects into <root>/<id>/ plus dataset.json. Refuses a
/// non-empty root unless force is set.
DatasetIndex write_dataset(const PhantomConfig& cfg, const std::filesystem::path& root,
                           bool force);
DatasetIndex load_dataset(const std::filesystem::path& root);

/// Ground-truth index map for a stored subject (mvi_true.qvol).
Volume load_ground_truth(const DatasetIndex& ds, const std::string& id);

} // namespace mvi::phantom
