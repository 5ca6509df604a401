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

#include "mvi/nn/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace mvi::nn {

// Two-block network: a U-Net style segmentation block reads the relaxometry
// channels (R1, R2, PD) and a reconstruction block fuses its features with
// the SyMVF map, which is also re-injected by shortcut concats so the final
// estimate stays anchored to the pixel-wise input. Main output comes from
// the reconstruction block, the auxiliary output from a linear 1x1 head on
// the segmentation decoder.

enum class OpKind { kInput, kConv, kTConv, kMaxPool, kConcat };

struct NodeSpec {
    OpKind kind = OpKind::kInput;
    std::string tag;              // optional name (inputs / skip sources)
    std::vector<int> inputs;      // node indices, all < own index
    int ksize = 0;                // conv: 1 or 3
    int in_ch = 0, out_ch = 0;
    bool relu = false;
};

struct NetworkSpec {
    std::vector<NodeSpec> nodes;  // topological order
    int input_relax = 0;
    int input_symvf = 1;
    int output_main = -1;
    int output_aux = -1;
    int width = 8;
};

void validate_spec(const NetworkSpec& spec);
void to_json(nlohmann::json& j, const NetworkSpec& spec);
void from_json(const nlohmann::json& j, NetworkSpec& spec);

/// The fixed two-block topology at segmentation width C (channels C, 2C, 4C
/// down the encoder).
NetworkSpec two_block_network(int width_c);

struct ParamEntry {
    std::size_t w_off = 0, w_count = 0;
    std::size_t b_off = 0, b_count = 0;
    int k_rows = 0; // weight rows: ksize*ksize*in_ch (conv) or 4*in_ch (tconv)
};

struct ParamLayout {
    std::vector<ParamEntry> per_node; // zero counts for nodes without params
    std::size_t total = 0;
};

ParamLayout make_layout(const NetworkSpec& spec);

/// Fan-in-scaled Gaussian for ReLU convs, 1/fan-in scale for linear layers,
/// zero biases; all draws keyed by (seed, node).
template <typename T>
std::vector<T> init_params(const NetworkSpec& spec, std::uint64_t seed);

template <typename T>
struct Workspace {
    std::vector<Tensor<T>> act;                 // per-node activations
    std::vector<Tensor<T>> grad;                // per-node gradients
    std::vector<std::vector<std::uint8_t>> pool_arg; // per-node argmax codes
    std::vector<T> col;                         // im2col tile scratch
    std::vector<T> col2;                        // gradient-column tile scratch
    std::vector<T> tmp;                         // transpose / scatter scratch
};

/// Runs the graph; activations land in ws.act (outputs at spec.output_main
/// and spec.output_aux). Checks shapes as it goes.
template <typename T>
void forward(const NetworkSpec& spec, const ParamLayout& layout, const T* params,
             Workspace<T>& ws, const Tensor<T>& relax, const Tensor<T>& symvf);

/// Reverse-mode pass after forward(); accumulates parameter gradients into
/// param_grads (caller zeroes it when starting a fresh accumulation).
template <typename T>
void backward(const NetworkSpec& spec, const ParamLayout& layout, const T* params,
              Workspace<T>& ws, const Tensor<T>& dmain, const Tensor<T>& daux,
              T* param_grads);

/// Convenience single-shot forward returning (main, aux).
template <typename T>
std::pair<Tensor<T>, Tensor<T>> forward_pair(const NetworkSpec& spec, const T* params,
                                             const Tensor<T>& relax,
                                             const Tensor<T>& symvf);

} // namespace mvi::nn
