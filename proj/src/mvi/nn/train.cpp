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
#include "mvi/nn/train.hpp"

#include "mvi/kernels/kernels.hpp"
#include "mvi/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace mvi::nn {
namespace {

using nlohmann::json;

/// R-7 percentile (linear interpolation) on a sorted vector.
double percentile_sorted(const std::vector<float>& sorted, double p) {
    require(!sorted.empty(), "percentile of empty data");
    if (sorted.size() == 1) return sorted[0];
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = h - static_cast<double>(lo);
    return static_cast<double>(sorted[lo]) +
           frac * (static_cast<double>(sorted[hi]) - static_cast<double>(sorted[lo]));
}

} // namespace

template <typename T>
LossParts loss_parts(const Tensor<T>& main, const Tensor<T>& aux, const Tensor<T>& target) {
    require(main.data.size() == target.data.size() && aux.data.size() == target.data.size(),
            "loss shape mismatch");
    const double n = static_cast<double>(target.data.size());
    double sse_m = 0, sse_a = 0;
    for (std::size_t i = 0; i < target.data.size(); ++i) {
        const double dm = static_cast<double>(main.data[i]) - static_cast<double>(target.data[i]);
        const double da = static_cast<double>(aux.data[i]) - static_cast<double>(target.data[i]);
        sse_m += dm * dm;
        sse_a += da * da;
    }
    LossParts lp;
    lp.rmse_main = std::sqrt(sse_m / n);
    lp.rmse_aux = std::sqrt(sse_a / n);
    lp.total = lp.rmse_main + kAuxLossWeight * lp.rmse_aux;
    return lp;
}

template <typename T>
void loss_backward(const Tensor<T>& main, const Tensor<T>& aux, const Tensor<T>& target,
                   Tensor<T>& dmain, Tensor<T>& daux) {
    const LossParts lp = loss_parts(main, aux, target);
    const double n = static_cast<double>(target.data.size());
    dmain = main;
    daux = aux;
    const double sm = lp.rmse_main > 0 ? 1.0 / (n * lp.rmse_main) : 0.0;
    const double sa = lp.rmse_aux > 0 ? kAuxLossWeight / (n * lp.rmse_aux) : 0.0;
    for (std::size_t i = 0; i < target.data.size(); ++i) {
        dmain.data[i] = static_cast<T>(
            sm * (static_cast<double>(main.data[i]) - static_cast<double>(target.data[i])));
        daux.data[i] = static_cast<T>(
            sa * (static_cast<double>(aux.data[i]) - static_cast<double>(target.data[i])));
    }
}

double lr_multiplier(int n) {
    require(n >= 1, "epoch number must be >= 1, got ", n);
    const double num = std::tanh(1.8 - 0.3 * static_cast<double>(n)) + 1.0;
    const double den = 2.0 * (std::tanh(1.5) + 1.0);
    return num / den;
}

double effective_lr(double base_lr, int n, bool normalize_first_epoch) {
    const double mult = lr_multiplier(n);
    return normalize_first_epoch ? base_lr * mult / lr_multiplier(1) : base_lr * mult;
}

TrainState make_train_state(const NetworkSpec& spec, std::uint64_t seed) {
    TrainState st;
    st.params = init_params<float>(spec, seed);
    st.adam_m.assign(st.params.size(), 0.0f);
    st.adam_v.assign(st.params.size(), 0.0f);
    st.rng_seed = seed;
    return st;
}

TrainState adam_step(TrainState state, const float* grads, std::size_t n, float lr) {
    require(n == state.params.size(), "gradient length mismatch");
    for (std::size_t i = 0; i < n; ++i)
        require(std::isfinite(grads[i]),
                "non-finite gradient at parameter ", i, "; training aborted");
    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const float corr1 = static_cast<float>(1.0 - std::pow(static_cast<double>(kAdamBeta1), t));
    const float corr2 = static_cast<float>(1.0 - std::pow(static_cast<double>(kAdamBeta2), t));
    kern::active().adam(n, state.params.data(), state.adam_m.data(), state.adam_v.data(),
                        grads, lr, kAdamBeta1, kAdamBeta2, kAdamEps, corr1, corr2);
    return state;
}

NormStats compute_norm_stats(const std::vector<const patch::PatchSet*>& corpus) {
    NormStats ns;
    for (int ch = 0; ch < 4; ++ch) {
        std::vector<float> all;
        std::size_t total = 0;
        for (const auto* ps : corpus)
            for (const auto& p : ps->patches) total += p.native[static_cast<std::size_t>(ch)].size();
        all.reserve(total);
        double acc = 0;
        for (const auto* ps : corpus)
            for (const auto& p : ps->patches)
                for (float v : p.native[static_cast<std::size_t>(ch)]) {
                    all.push_back(v);
                    acc += static_cast<double>(v);
                }
        require(!all.empty(), "empty training corpus");
        const double mean = acc / static_cast<double>(all.size());
        double var = 0;
        for (float v : all) {
            const double d = static_cast<double>(v) - mean;
            var += d * d;
        }
        var /= static_cast<double>(all.size());
        std::sort(all.begin(), all.end());
        ns.mean[static_cast<std::size_t>(ch)] = mean;
        ns.sd[static_cast<std::size_t>(ch)] = std::sqrt(var) > 1e-12 ? std::sqrt(var) : 1.0;
        ns.range[static_cast<std::size_t>(ch)] =
            percentile_sorted(all, 0.99) - percentile_sorted(all, 0.01);
    }
    return ns;
}

std::array<double, 4> noise_sd_from_stats(const NormStats& stats, double sigma_rel) {
    require(sigma_rel >= 0.0, "sigma_rel must be >= 0");
    std::array<double, 4> sd{};
    for (std::size_t c = 0; c < 4; ++c) sd[c] = sigma_rel * stats.range[c];
    return sd;
}

void apply_patch_noise(std::vector<float>& native, double sd, std::uint64_t seed,
                       std::size_t patch_index, int channel) {
    if (sd <= 0.0) return;
    Rng rng(Rng::derive(seed, 0x4e4f4953u /*"NOIS"*/, patch_index,
                        static_cast<std::uint64_t>(channel)));
    for (float& v : native)
        v = static_cast<float>(static_cast<double>(v) + sd * rng.next_normal());
}

patch::PatchSet add_gaussian_noise(const patch::PatchSet& ps,
                                   const std::array<double, 4>& sd, std::uint64_t seed) {
    patch::PatchSet out = ps;
    for (std::size_t i = 0; i < out.patches.size(); ++i)
        for (int ch = 0; ch < 4; ++ch) // input channels only; target untouched
            apply_patch_noise(out.patches[i].native[static_cast<std::size_t>(ch)],
                              sd[static_cast<std::size_t>(ch)], seed, i, ch);
    return out;
}

patch::PatchSet add_gaussian_noise(const patch::PatchSet& ps, double sigma_rel,
                                   std::uint64_t seed) {
    std::vector<const patch::PatchSet*> corpus{&ps};
    return add_gaussian_noise(ps, noise_sd_from_stats(compute_norm_stats(corpus), sigma_rel),
                              seed);
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& stem) {
    json j;
    j["version"] = 1;
    j["network"] = ck.spec;
    j["step_count"] = ck.state.step_count;
    j["epoch"] = ck.state.epoch;
    j["rng_seed"] = ck.state.rng_seed;
    j["param_count"] = ck.state.params.size();
    j["best_val_loss"] = ck.best_val_loss;
    j["norm"] = {{"mean", ck.norm.mean}, {"sd", ck.norm.sd}, {"range", ck.norm.range}};

    std::filesystem::path hdr = stem;
    hdr.concat(".ckpt");
    std::filesystem::path bin = stem;
    bin.concat(".ckpt.bin");
    if (hdr.has_parent_path()) std::filesystem::create_directories(hdr.parent_path());
    std::ofstream hf(hdr, std::ios::trunc);
    require(hf.good(), "cannot write checkpoint header ", hdr.string());
    hf << j.dump(2) << "\n";
    require(hf.good(), "I/O failure writing ", hdr.string());

    std::ofstream bf(bin, std::ios::binary | std::ios::trunc);
    require(bf.good(), "cannot write checkpoint payload ", bin.string());
    auto put = [&](const std::vector<float>& v) {
        bf.write(reinterpret_cast<const char*>(v.data()),
                 static_cast<std::streamsize>(v.size() * sizeof(float)));
    };
    put(ck.state.params);
    put(ck.state.adam_m);
    put(ck.state.adam_v);
    require(bf.good(), "I/O failure writing ", bin.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& stem) {
    std::filesystem::path hdr = stem;
    hdr.concat(".ckpt");
    std::filesystem::path bin = stem;
    bin.concat(".ckpt.bin");
    require(std::filesystem::exists(hdr), "missing checkpoint header ", hdr.string());
    require(std::filesystem::exists(bin), "missing checkpoint payload ", bin.string());

    std::ifstream hf(hdr);
    json j;
    try {
        hf >> j;
    } catch (const std::exception& e) {
        fail("malformed checkpoint header ", hdr.string(), ": ", e.what());
    }
    require(j.at("version").get<int>() == 1, "unsupported checkpoint version");
    Checkpoint ck;
    ck.spec = j.at("network").get<NetworkSpec>();
    ck.state.step_count = j.at("step_count").get<std::int64_t>();
    ck.state.epoch = j.at("epoch").get<int>();
    ck.state.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    ck.best_val_loss = j.value("best_val_loss", 0.0);
    ck.norm.mean = j.at("norm").at("mean").get<std::array<double, 4>>();
    ck.norm.sd = j.at("norm").at("sd").get<std::array<double, 4>>();
    ck.norm.range = j.at("norm").at("range").get<std::array<double, 4>>();

    const std::size_t count = j.at("param_count").get<std::size_t>();
    const std::size_t expect = 3 * count * sizeof(float);
    require(std::filesystem::file_size(bin) == expect, "checkpoint payload ", bin.string(),
            " has wrong size");
    std::ifstream bf(bin, std::ios::binary);
    auto get = [&](std::vector<float>& v) {
        v.resize(count);
        bf.read(reinterpret_cast<char*>(v.data()),
                static_cast<std::streamsize>(count * sizeof(float)));
    };
    get(ck.state.params);
    get(ck.state.adam_m);
    get(ck.state.adam_v);
    require(bf.good(), "short read on ", bin.string());
    for (std::size_t i = 0; i < count; ++i)
        require(std::isfinite(ck.state.params[i]), "corrupt checkpoint: non-finite parameter");
    const ParamLayout lay = make_layout(ck.spec);
    require(lay.total == count, "checkpoint parameter count does not match topology");
    return ck;
}

template LossParts loss_parts<float>(const Tensor<float>&, const Tensor<float>&,
                                     const Tensor<float>&);
template LossParts loss_parts<double>(const Tensor<double>&, const Tensor<double>&,
                                      const Tensor<double>&);
template void loss_backward<float>(const Tensor<float>&, const Tensor<float>&,
                                   const Tensor<float>&, Tensor<float>&, Tensor<float>&);
template void loss_backward<double>(const Tensor<double>&, const Tensor<double>&,
                                    const Tensor<double>&, Tensor<double>&, Tensor<double>&);

} // namespace mvi::nn
