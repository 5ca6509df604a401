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
#include "mvi/pipeline/pipeline.hpp"

#include "mvi/core/qvol.hpp"
#include "mvi/kernels/kernels.hpp"
#include "mvi/rng.hpp"
#include "mvi/stats/report.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

namespace mvi::pipeline {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

enum StreamTag : std::uint64_t {
    kTagSampler = 0x11,
    kTagFolds = 0x22,
    kTagInit = 0x33,
    kTagEpoch = 0x44,
    kTagShuffle = 0x55,
    kTagNoise = 0x66,
};

/// Runs fn(0..n-1) across up to `jobs` threads; rethrows the first worker
/// exception. Work is independent per item, so scheduling cannot change
/// results.
template <typename F>
void parallel_items(std::size_t n, int jobs, F&& fn) {
    const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(n)));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex err_mx;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::scoped_lock lk(err_mx);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

struct ItemSlot {
    nn::Tensor<float> relax, symvf, target, dmain, daux;
    nn::Workspace<float> ws;
    std::vector<float> grads;
    double sse_main = 0, sse_aux = 0;
    std::vector<float> scratch_native, scratch_big;
};

/// Build the three network tensors for one patch: optional keyed noise on
/// the input channels at native resolution, bilinear upsample, then the
/// fold's normalization. The target is upsampled untouched.
void materialize_item(const patch::Patch& p, const patch::SamplerConfig& scfg,
                      const nn::NormStats& norm, const std::array<double, 4>* noise_sd,
                      std::uint64_t noise_seed, std::size_t global_index, ItemSlot& slot) {
    const int m = scfg.patch_resized;
    slot.relax.resize(1, m, m, 3);
    slot.symvf.resize(1, m, m, 1);
    slot.target.resize(1, m, m, 1);
    slot.scratch_big.resize(static_cast<std::size_t>(m) * m);

    for (int ch = 0; ch < 4; ++ch) {
        const auto& native = p.native[static_cast<std::size_t>(ch)];
        const float* src = native.data();
        if (noise_sd && (*noise_sd)[static_cast<std::size_t>(ch)] > 0.0) {
            slot.scratch_native = native;
            nn::apply_patch_noise(slot.scratch_native, (*noise_sd)[static_cast<std::size_t>(ch)],
                                  noise_seed, global_index, ch);
            src = slot.scratch_native.data();
        }
        patch::resize_up(src, scfg.patch_native, slot.scratch_big.data());
        const float mean = static_cast<float>(norm.mean[static_cast<std::size_t>(ch)]);
        const float inv_sd = static_cast<float>(1.0 / norm.sd[static_cast<std::size_t>(ch)]);
        if (ch < 3) {
            for (int i = 0; i < m * m; ++i)
                slot.relax.data[static_cast<std::size_t>(i) * 3 + ch] =
                    (slot.scratch_big[static_cast<std::size_t>(i)] - mean) * inv_sd;
        } else {
            for (int i = 0; i < m * m; ++i)
                slot.symvf.data[static_cast<std::size_t>(i)] =
                    (slot.scratch_big[static_cast<std::size_t>(i)] - mean) * inv_sd;
        }
    }
    patch::resize_up(p.native[patch::kMtmvi].data(), scfg.patch_native,
                     slot.target.data.data());
}

double item_sse(const nn::Tensor<float>& out, const nn::Tensor<float>& target) {
    double acc = 0;
    for (std::size_t i = 0; i < target.data.size(); ++i) {
        const double d =
            static_cast<double>(out.data[i]) - static_cast<double>(target.data[i]);
        acc += d * d;
    }
    return acc;
}

std::string fold_dir_name(const FoldPlan& fold) { return "fold_" + fold.held_out; }

} // namespace

void validate_run_config(const RunConfig& cfg) {
    phantom::validate_config(cfg.phantom);
    patch::validate_sampler(cfg.sampler);
    require(cfg.network.width >= 1, "network width must be >= 1");
    require(cfg.network.batch >= 1, "batch size must be >= 1");
    require(cfg.network.sigma_rel >= 0.0, "sigma_rel must be >= 0");
    require(cfg.network.base_lr > 0.0, "base_lr must be positive");
    require(cfg.network.max_epochs >= 1 && cfg.network.max_epochs <= 10,
            "max_epochs must be in [1,10]");
    require(cfg.network.patience >= 1, "patience must be >= 1");
    require(!cfg.workspace.empty(), "workspace path missing");
}

RunConfig load_run_config(const fs::path& path) {
    require(fs::exists(path), "config file not found: ", path.string());
    std::ifstream f(path);
    json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        fail("malformed config ", path.string(), ": ", e.what());
    }
    RunConfig cfg;
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.workspace = j.at("workspace").get<std::string>();
    cfg.phantom = j.at("phantom").get<phantom::PhantomConfig>();
    const auto& s = j.at("sampler");
    cfg.sampler.patch_native = s.at("patch_native").get<int>();
    cfg.sampler.patch_resized = s.at("patch_resized").get<int>();
    cfg.sampler.per_subject_target = s.at("per_subject_target").get<int>();
    cfg.sampler.test_stride = s.at("test_stride").get<int>();
    cfg.sampler.seed = Rng::derive(cfg.seed, kTagSampler);
    const auto& n = j.at("network");
    cfg.network.width = n.at("width").get<int>();
    cfg.network.batch = n.at("batch").get<int>();
    cfg.network.sigma_rel = n.at("sigma_rel").get<double>();
    cfg.network.base_lr = n.at("base_lr").get<double>();
    cfg.network.normalize_first_epoch = n.at("normalize_first_epoch").get<bool>();
    cfg.network.max_epochs = n.at("max_epochs").get<int>();
    cfg.network.patience = n.at("patience").get<int>();
    const std::string pairing = j.at("stats").at("pairing").get<std::string>();
    if (pairing == "pooled")
        cfg.pairing = stats::Pairing::pooled;
    else if (pairing == "per_subject")
        cfg.pairing = stats::Pairing::per_subject;
    else
        fail("unknown pairing mode '", pairing, "'");
    validate_run_config(cfg);
    return cfg;
}

json run_config_json(const RunConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["workspace"] = cfg.workspace.string();
    j["phantom"] = cfg.phantom;
    j["sampler"] = {{"patch_native", cfg.sampler.patch_native},
                    {"patch_resized", cfg.sampler.patch_resized},
                    {"per_subject_target", cfg.sampler.per_subject_target},
                    {"test_stride", cfg.sampler.test_stride}};
    j["network"] = {{"width", cfg.network.width},
                    {"batch", cfg.network.batch},
                    {"sigma_rel", cfg.network.sigma_rel},
                    {"base_lr", cfg.network.base_lr},
                    {"normalize_first_epoch", cfg.network.normalize_first_epoch},
                    {"max_epochs", cfg.network.max_epochs},
                    {"patience", cfg.network.patience}};
    j["stats"] = {
        {"pairing", cfg.pairing == stats::Pairing::pooled ? "pooled" : "per_subject"}};
    return j;
}

std::uint64_t config_hash(const RunConfig& cfg) {
    return fnv1a64(run_config_json(cfg).dump());
}

std::vector<FoldPlan> make_folds(const std::vector<std::string>& subject_ids,
                                 std::uint64_t seed) {
    require(subject_ids.size() >= 3, "need at least 3 subjects for cross-validation, got ",
            subject_ids.size());
    std::vector<FoldPlan> folds;
    folds.reserve(subject_ids.size());
    for (std::size_t k = 0; k < subject_ids.size(); ++k) {
        FoldPlan fp;
        fp.held_out = subject_ids[k];
        fp.seed = Rng::derive(seed, kTagFolds, k);
        std::vector<std::string> rest;
        for (std::size_t i = 0; i < subject_ids.size(); ++i)
            if (i != k) rest.push_back(subject_ids[i]);
        Rng rng(fp.seed);
        shuffle(rest, rng);
        // 15:4 train/validation split scaled to the cohort, at least 1 each.
        std::size_t n_val = static_cast<std::size_t>(
            std::llround(static_cast<double>(rest.size()) * 4.0 / 19.0));
        n_val = std::max<std::size_t>(1, std::min(n_val, rest.size() - 1));
        fp.val_ids.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(n_val));
        fp.train_ids.assign(rest.begin() + static_cast<std::ptrdiff_t>(n_val), rest.end());
        folds.push_back(std::move(fp));
    }
    return folds;
}

json trainlog_json(const TrainLog& log) {
    json j;
    j["stop_reason"] = log.stop_reason;
    json eps = json::array();
    for (const auto& e : log.epochs)
        eps.push_back({{"epoch", e.epoch},
                       {"lr", e.lr},
                       {"train_loss", e.train_loss},
                       {"val_loss", e.val_loss},
                       {"wall_seconds", e.wall_seconds}});
    j["epochs"] = eps;
    return j;
}

PreparedSubject prepare_subject(const Subject& raw) {
    PreparedSubject ps;
    ps.brain = prep::brain_mask(raw.channel(Channel::BAP));
    ps.rois = prep::build_roiset(raw.labels, ps.brain);
    auto [mtmvi, scale] =
        prep::scale_mtsat(raw.channel(Channel::MTMVI), raw.channel(Channel::SyMVF),
                          ps.rois.roi_wm);
    ps.scale = scale;
    ps.subject = raw;
    ps.subject.volumes.erase(Channel::MTMVI);
    ps.subject.volumes.emplace(Channel::MTMVI, std::move(mtmvi));
    return ps;
}

TrainResult train_fold(const FoldPlan& fold,
                       const std::map<std::string, patch::PatchSet>& patches,
                       const NetConfig& net_cfg, const patch::SamplerConfig& sampler,
                       std::uint64_t run_seed, int fold_index, int jobs,
                       bool zero_wall_seconds) {
    const nn::NetworkSpec spec = nn::two_block_network(net_cfg.width);
    const nn::ParamLayout layout = nn::make_layout(spec);

    // Flat patch lists in fold order; the global index keys epoch noise.
    std::vector<const patch::Patch*> train_list, val_list;
    std::vector<const patch::PatchSet*> train_sets;
    std::size_t leaked = 0;
    for (const auto& id : fold.train_ids) {
        const auto& ps = patches.at(id);
        train_sets.push_back(&ps);
        for (const auto& p : ps.patches) {
            require(p.prov.subject_id != fold.held_out,
                    "leakage: training patch from held-out subject ", fold.held_out);
            leaked += p.prov.subject_id == fold.held_out ? 1 : 0;
            train_list.push_back(&p);
        }
    }
    for (const auto& id : fold.val_ids) {
        const auto& ps = patches.at(id);
        for (const auto& p : ps.patches) {
            require(p.prov.subject_id != fold.held_out,
                    "leakage: validation patch from held-out subject ", fold.held_out);
            val_list.push_back(&p);
        }
    }
    require(!train_list.empty() && !val_list.empty(), "fold ", fold.held_out,
            " has empty train or validation patch set");

    const nn::NormStats norm = nn::compute_norm_stats(train_sets);
    const std::array<double, 4> noise_sd =
        nn::noise_sd_from_stats(norm, net_cfg.sigma_rel);

    nn::TrainState state = nn::make_train_state(
        spec, Rng::derive(run_seed, kTagInit, static_cast<std::uint64_t>(fold_index)));
    nn::TrainState best_state = state;
    double best_val = std::numeric_limits<double>::infinity();

    const int batch = net_cfg.batch;
    std::vector<ItemSlot> slots(static_cast<std::size_t>(batch));
    std::vector<float> grand_grads(layout.total, 0.0f);

    TrainLog log;
    EarlyStopper stopper(net_cfg.patience);
    const std::size_t hw = static_cast<std::size_t>(sampler.patch_resized) *
                           static_cast<std::size_t>(sampler.patch_resized);

    auto run_batch = [&](const std::vector<std::size_t>& idxs,
                         const std::vector<const patch::Patch*>& list, bool training,
                         std::uint64_t noise_seed) -> nn::LossParts {
        const std::size_t bsz = idxs.size();
        parallel_items(bsz, jobs, [&](std::size_t bi) {
            ItemSlot& slot = slots[bi];
            const patch::Patch& p = *list[idxs[bi]];
            materialize_item(p, sampler, norm, training ? &noise_sd : nullptr, noise_seed,
                             idxs[bi], slot);
            nn::forward(spec, layout, state.params.data(), slot.ws, slot.relax, slot.symvf);
            slot.sse_main = item_sse(slot.ws.act[spec.output_main], slot.target);
            slot.sse_aux = item_sse(slot.ws.act[spec.output_aux], slot.target);
        });
        double sse_m = 0, sse_a = 0;
        for (std::size_t bi = 0; bi < bsz; ++bi) {
            sse_m += slots[bi].sse_main;
            sse_a += slots[bi].sse_aux;
        }
        const double n_pix = static_cast<double>(bsz * hw);
        nn::LossParts lp;
        lp.rmse_main = std::sqrt(sse_m / n_pix);
        lp.rmse_aux = std::sqrt(sse_a / n_pix);
        lp.total = lp.rmse_main + nn::kAuxLossWeight * lp.rmse_aux;
        if (!training) return lp;

        const double sm = lp.rmse_main > 0 ? 1.0 / (n_pix * lp.rmse_main) : 0.0;
        const double sa =
            lp.rmse_aux > 0 ? nn::kAuxLossWeight / (n_pix * lp.rmse_aux) : 0.0;
        parallel_items(bsz, jobs, [&](std::size_t bi) {
            ItemSlot& slot = slots[bi];
            const nn::Tensor<float>& main_out = slot.ws.act[spec.output_main];
            const nn::Tensor<float>& aux_out = slot.ws.act[spec.output_aux];
            slot.dmain = main_out;
            slot.daux = aux_out;
            for (std::size_t i = 0; i < slot.target.data.size(); ++i) {
                slot.dmain.data[i] =
                    static_cast<float>(sm * (static_cast<double>(main_out.data[i]) -
                                             static_cast<double>(slot.target.data[i])));
                slot.daux.data[i] =
                    static_cast<float>(sa * (static_cast<double>(aux_out.data[i]) -
                                             static_cast<double>(slot.target.data[i])));
            }
            slot.grads.assign(layout.total, 0.0f);
            nn::backward(spec, layout, state.params.data(), slot.ws, slot.dmain, slot.daux,
                         slot.grads.data());
        });
        // Fixed-order reduction keeps results identical for any job count.
        std::fill(grand_grads.begin(), grand_grads.end(), 0.0f);
        for (std::size_t bi = 0; bi < bsz; ++bi)
            kern::active().axpy(layout.total, 1.0f, slots[bi].grads.data(),
                                grand_grads.data());
        return lp;
    };

    for (int epoch = 1; epoch <= net_cfg.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double lr = nn::effective_lr(net_cfg.base_lr, epoch,
                                           net_cfg.normalize_first_epoch);
        const std::uint64_t epoch_key = Rng::derive(
            run_seed, kTagEpoch, static_cast<std::uint64_t>(fold_index),
            static_cast<std::uint64_t>(epoch));
        const std::uint64_t noise_seed = Rng::derive(epoch_key, kTagNoise);

        std::vector<std::size_t> order(train_list.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng shuffle_rng(Rng::derive(epoch_key, kTagShuffle));
        shuffle(order, shuffle_rng);

        double loss_sum = 0;
        std::size_t n_batches = 0;
        for (std::size_t b0 = 0; b0 < order.size(); b0 += static_cast<std::size_t>(batch)) {
            const std::size_t bsz =
                std::min<std::size_t>(static_cast<std::size_t>(batch), order.size() - b0);
            std::vector<std::size_t> idxs(order.begin() + static_cast<std::ptrdiff_t>(b0),
                                          order.begin() +
                                              static_cast<std::ptrdiff_t>(b0 + bsz));
            const nn::LossParts lp = run_batch(idxs, train_list, true, noise_seed);
            state = nn::adam_step(std::move(state), grand_grads.data(), layout.total,
                                  static_cast<float>(lr));
            loss_sum += lp.total;
            n_batches += 1;
        }
        const double train_loss = loss_sum / static_cast<double>(n_batches);

        double val_sum = 0;
        std::size_t val_batches = 0;
        for (std::size_t b0 = 0; b0 < val_list.size(); b0 += static_cast<std::size_t>(batch)) {
            const std::size_t bsz =
                std::min<std::size_t>(static_cast<std::size_t>(batch), val_list.size() - b0);
            std::vector<std::size_t> idxs(bsz);
            for (std::size_t i = 0; i < bsz; ++i) idxs[i] = b0 + i;
            val_sum += run_batch(idxs, val_list, false, 0).total;
            val_batches += 1;
        }
        const double val_loss = val_sum / static_cast<double>(val_batches);

        EpochEntry e;
        e.epoch = epoch;
        e.lr = lr;
        e.train_loss = train_loss;
        e.val_loss = val_loss;
        e.wall_seconds =
            zero_wall_seconds
                ? 0.0
                : std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                      .count();
        log.epochs.push_back(e);

        if (!std::isfinite(train_loss) || !std::isfinite(val_loss)) {
            log.stop_reason = "abort";
            fail("fold ", fold.held_out, ": non-finite loss at epoch ", epoch,
                 "; training aborted");
        }

        const bool stop = stopper.update(val_loss);
        if (stopper.improved_last) {
            best_state = state;
            best_state.epoch = epoch;
            best_val = val_loss;
        }
        if (stop) {
            log.stop_reason = "early_stop";
            break;
        }
        if (epoch == net_cfg.max_epochs) log.stop_reason = "max_epochs";
    }

    TrainResult tr;
    tr.checkpoint.spec = spec;
    tr.checkpoint.state = std::move(best_state);
    tr.checkpoint.norm = norm;
    tr.checkpoint.best_val_loss = best_val;
    tr.log = std::move(log);
    tr.leaked_patches = leaked;
    return tr;
}

Volume infer_subject(const nn::Checkpoint& ck, const PreparedSubject& ps,
                     const patch::SamplerConfig& sampler, int jobs) {
    const patch::PatchSet tiles = patch::tile_test_patches(ps.subject, ps.brain, sampler);
    const nn::ParamLayout layout = nn::make_layout(ck.spec);
    require(layout.total == ck.state.params.size(),
            "checkpoint does not match network topology");

    std::vector<std::pair<patch::Provenance, std::vector<float>>> outputs(
        tiles.patches.size());
    const int workers = std::max(1, jobs);
    std::vector<ItemSlot> slots(static_cast<std::size_t>(workers));
    std::atomic<int> slot_counter{0};
    thread_local int slot_id = -1; // per-thread slot assignment

    parallel_items(tiles.patches.size(), workers, [&](std::size_t i) {
        if (slot_id < 0) slot_id = slot_counter.fetch_add(1) % workers;
        ItemSlot& slot = slots[static_cast<std::size_t>(slot_id)];
        materialize_item(tiles.patches[i], sampler, ck.norm, nullptr, 0, i, slot);
        nn::forward(ck.spec, layout, ck.state.params.data(), slot.ws, slot.relax,
                    slot.symvf);
        outputs[i] = {tiles.patches[i].prov, slot.ws.act[ck.spec.output_main].data};
    });
    return patch::reassemble(outputs, ps.subject.volumes.begin()->second.shape, sampler);
}

namespace {

json fold_json(const FoldPlan& f) {
    return json{{"held_out", f.held_out},
                {"train_ids", f.train_ids},
                {"val_ids", f.val_ids},
                {"seed", f.seed}};
}

struct RunState {
    phantom::DatasetIndex ds;
    std::map<std::string, PreparedSubject> prepared;
    std::map<std::string, patch::PatchSet> patchsets;
    std::vector<FoldPlan> folds;
    patch::SamplerConfig sampler;
};

RunState load_run_state(const RunConfig& cfg, bool with_patches) {
    RunState rs;
    const fs::path dataset_dir = cfg.workspace / "dataset";
    require(fs::exists(dataset_dir / "dataset.json"),
            "dataset not found under ", dataset_dir.string(),
            "; run the phantom subcommand first");
    rs.ds = phantom::load_dataset(dataset_dir);
    rs.sampler = cfg.sampler;
    rs.sampler.seed = Rng::derive(cfg.seed, kTagSampler);
    for (const auto& id : rs.ds.subject_ids) {
        Subject raw = load_subject(rs.ds.root, id, rs.ds.legend);
        rs.prepared.emplace(id, prepare_subject(raw));
    }
    if (with_patches)
        for (const auto& id : rs.ds.subject_ids) {
            const PreparedSubject& ps = rs.prepared.at(id);
            rs.patchsets.emplace(
                id, patch::sample_training_patches(ps.subject, ps.brain, rs.sampler));
        }
    rs.folds = make_folds(rs.ds.subject_ids, Rng::derive(cfg.seed, kTagFolds));
    return rs;
}

RunOutcome stats_stage(const RunConfig& cfg, RunState& rs, const fs::path& run_dir,
                       json& manifest) {
    RunOutcome out;
    out.run_dir = run_dir;
    std::map<std::string, Volume> genmvi;
    for (const auto& fold : rs.folds) {
        const fs::path p = run_dir / fold_dir_name(fold) / "genmvi";
        require(fs::exists(fs::path(p).concat(".qvol")), "missing GenMVI volume for ",
                fold.held_out, "; train all folds first");
        genmvi.emplace(fold.held_out, load_volume(p));
    }

    std::vector<stats::RoiStatRow> rows;
    std::vector<stats::SubjectMaps> maps;
    for (const auto& id : rs.ds.subject_ids) {
        const PreparedSubject& ps = rs.prepared.at(id);
        auto r = stats::roi_means(id, ps.rois, ps.subject.channel(Channel::MTMVI),
                                  ps.subject.channel(Channel::SyMVF), genmvi.at(id));
        rows.insert(rows.end(), r.begin(), r.end());
        stats::SubjectMaps sm;
        sm.subject_id = id;
        sm.rois = &ps.rois;
        sm.mtmvi = &ps.subject.channel(Channel::MTMVI);
        sm.symvf = &ps.subject.channel(Channel::SyMVF);
        sm.genmvi = &genmvi.at(id);
        maps.push_back(sm);
    }
    out.roi = stats::run_roi_analysis(rows, cfg.pairing);
    out.pixel = stats::run_pixel_analysis(maps);
    stats::emit_report(out.roi, out.pixel, run_dir / "reports");

    manifest["pooled_r_symvf"] = out.roi.pooled_r_symvf;
    manifest["pooled_r_genmvi"] = out.roi.pooled_r_genmvi;
    return out;
}

void write_manifest(const fs::path& run_dir, const json& manifest) {
    std::ofstream f(run_dir / "run.json", std::ios::trunc);
    require(f.good(), "cannot write run manifest");
    f << manifest.dump(2) << "\n";
    require(f.good(), "I/O failure writing run manifest");
}

} // namespace

RunOutcome run_pipeline(const RunConfig& cfg, const RunOptions& opt) {
    validate_run_config(cfg);
    const fs::path run_dir = cfg.workspace / "run";
    fs::create_directories(run_dir);

    RunState rs = load_run_state(cfg, true);

    json manifest;
    manifest["config"] = run_config_json(cfg);
    char hash_hex[24];
    std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                  static_cast<unsigned long long>(config_hash(cfg)));
    manifest["config_hash"] = hash_hex;
    manifest["kernel_backend"] = kern::active_name();
    json jfolds = json::array();
    for (const auto& f : rs.folds) jfolds.push_back(fold_json(f));
    manifest["folds"] = jfolds;
    json jscale = json::object();
    for (const auto& [id, ps] : rs.prepared)
        jscale[id] = {{"c", ps.scale.c},
                      {"wm_mean_symvf", ps.scale.wm_mean_symvf},
                      {"wm_mean_mtsat", ps.scale.wm_mean_mtsat}};
    manifest["scaling"] = jscale;

    std::size_t total_leaked = 0;
    json jleak = json::object();
    bool all_folds_done = true;
    for (std::size_t k = 0; k < rs.folds.size(); ++k) {
        const FoldPlan& fold = rs.folds[k];
        if (opt.only_fold >= 0 && static_cast<std::size_t>(opt.only_fold) != k) {
            const fs::path done = run_dir / fold_dir_name(fold) / "done.json";
            if (!fs::exists(done)) all_folds_done = false;
            continue;
        }
        const fs::path fold_dir = run_dir / fold_dir_name(fold);
        fs::create_directories(fold_dir);
        const fs::path done_marker = fold_dir / "done.json";
        if (opt.resume && fs::exists(done_marker) &&
            fs::exists(fold_dir / "checkpoint.ckpt") &&
            fs::exists(fold_dir / "genmvi.qvol")) {
            std::cerr << "[mvi] fold " << fold.held_out << ": reusing completed fold\n";
            std::ifstream df(done_marker);
            json dj;
            df >> dj;
            jleak[fold.held_out] = dj.value("leaked_patches", 0);
            continue;
        }

        std::cerr << "[mvi] fold " << fold.held_out << ": training ("
                  << fold.train_ids.size() << " train / " << fold.val_ids.size()
                  << " val subjects)\n";
        TrainResult tr =
            train_fold(fold, rs.patchsets, cfg.network, rs.sampler, cfg.seed,
                       static_cast<int>(k), opt.jobs, opt.deterministic);
        total_leaked += tr.leaked_patches;
        jleak[fold.held_out] = tr.leaked_patches;

        nn::save_checkpoint(tr.checkpoint, fold_dir / "checkpoint");
        {
            std::ofstream lf(fold_dir / "trainlog.json", std::ios::trunc);
            lf << trainlog_json(tr.log).dump(2) << "\n";
            require(lf.good(), "cannot write train log");
        }
        Volume gen = infer_subject(tr.checkpoint, rs.prepared.at(fold.held_out),
                                   rs.sampler, opt.jobs);
        save_volume(gen, fold_dir / "genmvi");
        {
            json dj;
            dj["held_out"] = fold.held_out;
            dj["leaked_patches"] = tr.leaked_patches;
            dj["stop_reason"] = tr.log.stop_reason;
            dj["best_val_loss"] = tr.checkpoint.best_val_loss;
            dj["epochs_run"] = tr.log.epochs.size();
            std::ofstream df(done_marker, std::ios::trunc);
            df << dj.dump(2) << "\n";
            require(df.good(), "cannot write fold marker");
        }
        std::cerr << "[mvi] fold " << fold.held_out << ": " << tr.log.stop_reason
                  << " after " << tr.log.epochs.size() << " epochs, best val "
                  << tr.checkpoint.best_val_loss << "\n";
    }
    manifest["leakage"] = jleak;
    manifest["leaked_total"] = total_leaked;

    RunOutcome out;
    out.run_dir = run_dir;
    out.leaked_patches = total_leaked;
    if (opt.only_fold >= 0 && !all_folds_done) {
        write_manifest(run_dir, manifest);
        std::cerr << "[mvi] single-fold run: statistics deferred until all folds exist\n";
        return out;
    }
    out = stats_stage(cfg, rs, run_dir, manifest);
    out.leaked_patches = total_leaked;
    write_manifest(run_dir, manifest);
    return out;
}

RunOutcome run_report_stage(const RunConfig& cfg) {
    validate_run_config(cfg);
    const fs::path run_dir = cfg.workspace / "run";
    RunState rs = load_run_state(cfg, false);
    json manifest;
    const fs::path manifest_path = run_dir / "run.json";
    if (fs::exists(manifest_path)) {
        std::ifstream mf(manifest_path);
        mf >> manifest;
    } else {
        manifest["config"] = run_config_json(cfg);
    }
    RunOutcome out = stats_stage(cfg, rs, run_dir, manifest);
    write_manifest(run_dir, manifest);
    return out;
}

} // namespace mvi::pipeline
