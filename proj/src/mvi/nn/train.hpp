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

#include "mvi/nn/network.hpp"
#include "mvi/patch/patching.hpp"

#include <array>
#include <filesystem>

namespace mvi::nn {

// Training-side pieces: dual-output RMSE loss, the hyperbolic epoch
// schedule, Adam state, noise augmentation, input normalization, and the
// checkpoint container.

inline constexpr double kAuxLossWeight = 0.2;

struct LossParts {
    double total = 0, rmse_main = 0, rmse_aux = 0;
};

/// RMSE over all pixels in the batch for both heads;
/// total = rmse_main + 0.2 * rmse_aux. float64 accumulation.
template <typename T>
LossParts loss_parts(const Tensor<T>& main, const Tensor<T>& aux, const Tensor<T>& target);

/// Gradients of the total loss w.r.t. both outputs.
template <typename T>
void loss_backward(const Tensor<T>& main, const Tensor<T>& aux, const Tensor<T>& target,
                   Tensor<T>& dmain, Tensor<T>& daux);

/// (tanh(1.8 - 0.3 n) + 1) / (2 (tanh(1.5) + 1)); exactly 0.5 at n = 1.
double lr_multiplier(int n);

/// base_lr * multiplier(n) / (normalize_first_epoch ? multiplier(1) : 1),
/// so the default reading starts epoch 1 exactly at base_lr.
double effective_lr(double base_lr, int n, bool normalize_first_epoch);

struct TrainState {
    std::vector<float> params, adam_m, adam_v;
    std::int64_t step_count = 0;
    int epoch = 0;
    std::uint64_t rng_seed = 0;
};

TrainState make_train_state(const NetworkSpec& spec, std::uint64_t seed);

inline constexpr float kAdamBeta1 = 0.9f;
inline constexpr float kAdamBeta2 = 0.999f;
inline constexpr float kAdamEps = 1e-8f;

/// Standard Adam with bias correction; pure in (state, grads, lr). Aborts on
/// non-finite gradients.
TrainState adam_step(TrainState state, const float* grads, std::size_t n, float lr);

/// Per-input-channel normalization and noise scales, all taken from the
/// training corpus only.
struct NormStats {
    std::array<double, 4> mean{};   // R1, R2, PD, SyMVF
    std::array<double, 4> sd{};
    std::array<double, 4> range{};  // 1st..99th percentile span
};

NormStats compute_norm_stats(const std::vector<const patch::PatchSet*>& corpus);

/// sd = sigma_rel * robust range per channel.
std::array<double, 4> noise_sd_from_stats(const NormStats& stats, double sigma_rel);

/// Zero-mean Gaussian noise on the input channels only (never the MTMVI
/// target), keyed by (seed, patch index, channel) so results do not depend
/// on batch composition. Pass a fresh seed each epoch.
patch::PatchSet add_gaussian_noise(const patch::PatchSet& ps,
                                   const std::array<double, 4>& sd, std::uint64_t seed);

/// Convenience form matching the op contract: ranges from the set itself.
patch::PatchSet add_gaussian_noise(const patch::PatchSet& ps, double sigma_rel,
                                   std::uint64_t seed);

/// Noise for one patch channel, the primitive the batch loader shares with
/// add_gaussian_noise.
void apply_patch_noise(std::vector<float>& native, double sd, std::uint64_t seed,
                       std::size_t patch_index, int channel);

struct Checkpoint {
    NetworkSpec spec;
    TrainState state;
    NormStats norm;
    double best_val_loss = 0;
};

/// "<stem>.ckpt" JSON plus "<stem>.ckpt.bin" raw float32 payload
/// (params | adam_m | adam_v); round-trips bit-exactly.
void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& stem);
Checkpoint load_checkpoint(const std::filesystem::path& stem);

} // namespace mvi::nn
