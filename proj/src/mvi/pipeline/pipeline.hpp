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

#include "mvi/nn/train.hpp"
#include "mvi/phantom/phantom.hpp"
#include "mvi/prep/preprocess.hpp"
#include "mvi/stats/stats.hpp"

#include <filesystem>
#include <limits>
#include <map>
#include <optional>

namespace mvi::pipeline {

struct NetConfig {
    int width = 8;
    int batch = 8;
    double sigma_rel = 0.03;
    double base_lr = 1e-4;
    bool normalize_first_epoch = true;
    int max_epochs = 10; // hard cap per protocol
    int patience = 3;    // consecutive non-improving epochs before stopping
};

struct RunConfig {
    phantom::PhantomConfig phantom;
    patch::SamplerConfig sampler;
    NetConfig network;
    stats::Pairing pairing = stats::Pairing::pooled;
    std::filesystem::path workspace;
    std::uint64_t seed = 1;
};

void validate_run_config(const RunConfig& cfg);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json run_config_json(const RunConfig& cfg);
std::uint64_t config_hash(const RunConfig& cfg);

struct FoldPlan {
    std::string held_out;
    std::vector<std::string> train_ids;
    std::vector<std::string> val_ids;
    std::uint64_t seed = 0;
};

/// One fold per subject; the remaining subjects are split by a seeded
/// shuffle at the 15:4 ratio (rounded to nearest, validation at least 1).
std::vector<FoldPlan> make_folds(const std::vector<std::string>& subject_ids,
                                 std::uint64_t seed);

struct EpochEntry {
    int epoch = 0;
    double lr = 0;
    double train_loss = 0;
    double val_loss = 0;
    double wall_seconds = 0;
};

struct TrainLog {
    std::vector<EpochEntry> epochs;
    std::string stop_reason; // max_epochs | early_stop | abort
};

nlohmann::json trainlog_json(const TrainLog& log);

/// Patience rule: "did not decrease" is judged against the best validation
/// loss seen so far.
struct EarlyStopper {
    int patience;
    double best = std::numeric_limits<double>::infinity();
    int streak = 0;
    bool improved_last = false;

    explicit EarlyStopper(int patience_epochs) : patience(patience_epochs) {}
    /// Feed one epoch's validation loss; true means stop now.
    bool update(double val_loss) {
        if (val_loss < best) {
            best = val_loss;
            streak = 0;
            improved_last = true;
        } else {
            streak += 1;
            improved_last = false;
        }
        return streak >= patience;
    }
};

/// Subject after preprocessing: MTMVI channel replaced by the WM-scaled
/// target, plus brain mask and ROI set.
struct PreparedSubject {
    Subject subject;
    Mask brain;
    prep::RoiSet rois;
    prep::ScaleResult scale;
};

PreparedSubject prepare_subject(const Subject& raw);

struct TrainResult {
    nn::Checkpoint checkpoint; // best-validation weights
    TrainLog log;
    std::size_t leaked_patches = 0; // must stay 0; provenance audit
};

/// Trains one fold. Deterministic for fixed (config, run_seed, fold_index)
/// regardless of `jobs`: batch items run in parallel but gradients reduce in
/// fixed item order.
TrainResult train_fold(const FoldPlan& fold,
                       const std::map<std::string, patch::PatchSet>& patches,
                       const NetConfig& net_cfg, const patch::SamplerConfig& sampler,
                       std::uint64_t run_seed, int fold_index, int jobs,
                       bool zero_wall_seconds);

/// Tile, forward (main output), reassemble onto the subject grid.
Volume infer_subject(const nn::Checkpoint& ck, const PreparedSubject& ps,
                     const patch::SamplerConfig& sampler, int jobs);

struct RunOptions {
    int jobs = 1;
    bool deterministic = false; // zero wall-clock fields in artifacts
    int only_fold = -1;         // -1 = all folds
    bool resume = true;
};

struct RunOutcome {
    std::filesystem::path run_dir;
    stats::RoiAnalysis roi;
    stats::PixelAnalysis pixel;
    std::size_t leaked_patches = 0;
};

/// Full protocol: preprocess, folds, train, infer, statistics, report.
/// Resumable per fold; artifacts land under <workspace>/run/.
RunOutcome run_pipeline(const RunConfig& cfg, const RunOptions& opt);

/// Statistics + report emission from existing per-fold GenMVI volumes.
RunOutcome run_report_stage(const RunConfig& cfg);

} // namespace mvi::pipeline
