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
#include "mvi/nn/network.hpp"

#include "mvi/kernels/kernels.hpp"
#include "mvi/rng.hpp"

#include <cmath>
#include <cstring>

namespace mvi::nn {
namespace {

using nlohmann::json;

// Pixel-row tile for im2col so the scratch stays cache-resident.
constexpr std::size_t kTileRows = 1024;

// Float goes through the dispatched kernels; double (gradient-check mode)
// uses reference loops with the same accumulation order.
template <typename T>
struct Ops {
    static void gemm(std::size_t M, std::size_t N, std::size_t K, const T* A,
                     std::size_t lda, const T* B, std::size_t ldb, T* C,
                     std::size_t ldc, bool accumulate) {
        for (std::size_t m = 0; m < M; ++m) {
            T* crow = C + m * ldc;
            if (!accumulate)
                for (std::size_t n = 0; n < N; ++n) crow[n] = T(0);
            const T* arow = A + m * lda;
            for (std::size_t k = 0; k < K; ++k) {
                const T a = arow[k];
                const T* brow = B + k * ldb;
                for (std::size_t n = 0; n < N; ++n)
                    crow[n] = std::fma(a, brow[n], crow[n]);
            }
        }
    }
    static void gemm_tn(std::size_t M, std::size_t N, std::size_t K, const T* A,
                        std::size_t lda, const T* B, std::size_t ldb, T* C,
                        std::size_t ldc, bool accumulate) {
        if (!accumulate)
            for (std::size_t m = 0; m < M; ++m)
                for (std::size_t n = 0; n < N; ++n) C[m * ldc + n] = T(0);
        for (std::size_t k = 0; k < K; ++k) {
            const T* arow = A + k * lda;
            const T* brow = B + k * ldb;
            for (std::size_t m = 0; m < M; ++m) {
                const T a = arow[m];
                T* crow = C + m * ldc;
                for (std::size_t n = 0; n < N; ++n)
                    crow[n] = std::fma(a, brow[n], crow[n]);
            }
        }
    }
    static void bias_relu(std::size_t rows, std::size_t ch, const T* x, const T* b, T* y) {
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < ch; ++c) {
                const T v = x[r * ch + c] + b[c];
                y[r * ch + c] = v > T(0) ? v : T(0);
            }
    }
    static void bias_add(std::size_t rows, std::size_t ch, const T* x, const T* b, T* y) {
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < ch; ++c) y[r * ch + c] = x[r * ch + c] + b[c];
    }
    static void relu_bwd(std::size_t n, const T* out, T* g) {
        for (std::size_t i = 0; i < n; ++i)
            if (!(out[i] > T(0))) g[i] = T(0);
    }
};

template <>
struct Ops<float> {
    static void gemm(std::size_t M, std::size_t N, std::size_t K, const float* A,
                     std::size_t lda, const float* B, std::size_t ldb, float* C,
                     std::size_t ldc, bool accumulate) {
        kern::active().gemm(M, N, K, A, lda, B, ldb, C, ldc, accumulate);
    }
    static void gemm_tn(std::size_t M, std::size_t N, std::size_t K, const float* A,
                        std::size_t lda, const float* B, std::size_t ldb, float* C,
                        std::size_t ldc, bool accumulate) {
        kern::active().gemm_tn(M, N, K, A, lda, B, ldb, C, ldc, accumulate);
    }
    static void bias_relu(std::size_t rows, std::size_t ch, const float* x,
                          const float* b, float* y) {
        kern::active().bias_relu(rows, ch, x, b, y);
    }
    static void bias_add(std::size_t rows, std::size_t ch, const float* x,
                         const float* b, float* y) {
        kern::active().bias_add(rows, ch, x, b, y);
    }
    static void relu_bwd(std::size_t n, const float* out, float* g) {
        kern::active().relu_bwd(n, out, g);
    }
};

template <typename T>
void ensure_dims(Tensor<T>& t, int b, int h, int w, int c, bool zero) {
    if (t.b == b && t.h == h && t.w == w && t.c == c) {
        if (zero) std::fill(t.data.begin(), t.data.end(), T(0));
        return;
    }
    t.resize(b, h, w, c);
}

/// im2col for a run of output pixels [p0, p0+count) of a 3x3 same-padded
/// conv; column layout (ky*3+kx)*cin + ci.
template <typename T>
void im2col3_range(const T* in, int h, int w, int cin, std::size_t p0,
                   std::size_t count, T* col) {
    const std::size_t K = 9u * static_cast<std::size_t>(cin);
    for (std::size_t p = 0; p < count; ++p) {
        const int y = static_cast<int>((p0 + p) / static_cast<std::size_t>(w));
        const int x = static_cast<int>((p0 + p) % static_cast<std::size_t>(w));
        T* crow = col + p * K;
        for (int ky = 0; ky < 3; ++ky) {
            const int yy = y + ky - 1;
            for (int kx = 0; kx < 3; ++kx) {
                const int xx = x + kx - 1;
                T* dst = crow + static_cast<std::size_t>(ky * 3 + kx) * cin;
                if (yy < 0 || yy >= h || xx < 0 || xx >= w) {
                    for (int ci = 0; ci < cin; ++ci) dst[ci] = T(0);
                } else {
                    const T* src = in + (static_cast<std::size_t>(yy) * w + xx) * cin;
                    for (int ci = 0; ci < cin; ++ci) dst[ci] = src[ci];
                }
            }
        }
    }
}

/// Adjoint of im2col3_range: scatter-add column gradients back to the image.
template <typename T>
void col2im3_range(const T* col, int h, int w, int cin, std::size_t p0,
                   std::size_t count, T* din) {
    const std::size_t K = 9u * static_cast<std::size_t>(cin);
    for (std::size_t p = 0; p < count; ++p) {
        const int y = static_cast<int>((p0 + p) / static_cast<std::size_t>(w));
        const int x = static_cast<int>((p0 + p) % static_cast<std::size_t>(w));
        const T* crow = col + p * K;
        for (int ky = 0; ky < 3; ++ky) {
            const int yy = y + ky - 1;
            if (yy < 0 || yy >= h) continue;
            for (int kx = 0; kx < 3; ++kx) {
                const int xx = x + kx - 1;
                if (xx < 0 || xx >= w) continue;
                const T* src = crow + static_cast<std::size_t>(ky * 3 + kx) * cin;
                T* dst = din + (static_cast<std::size_t>(yy) * w + xx) * cin;
                for (int ci = 0; ci < cin; ++ci) dst[ci] += src[ci];
            }
        }
    }
}

template <typename T>
void conv_forward_node(const NodeSpec& nd, const ParamEntry& pe, const T* params,
                       const Tensor<T>& in, Tensor<T>& out, std::vector<T>& col) {
    require(in.c == nd.in_ch, "conv channel mismatch: got ", in.c, ", want ", nd.in_ch);
    ensure_dims(out, in.b, in.h, in.w, nd.out_ch, false);
    const T* W = params + pe.w_off;
    const T* B = params + pe.b_off;
    const std::size_t hw = static_cast<std::size_t>(in.h) * in.w;
    const std::size_t K = static_cast<std::size_t>(pe.k_rows);
    for (int bi = 0; bi < in.b; ++bi) {
        const T* src = in.item(bi);
        T* dst = out.item(bi);
        if (nd.ksize == 1) {
            Ops<T>::gemm(hw, static_cast<std::size_t>(nd.out_ch), K, src, K, W,
                         static_cast<std::size_t>(nd.out_ch), dst,
                         static_cast<std::size_t>(nd.out_ch), false);
        } else {
            col.resize(std::min(kTileRows, hw) * K);
            for (std::size_t p0 = 0; p0 < hw; p0 += kTileRows) {
                const std::size_t count = std::min(kTileRows, hw - p0);
                im2col3_range(src, in.h, in.w, nd.in_ch, p0, count, col.data());
                Ops<T>::gemm(count, static_cast<std::size_t>(nd.out_ch), K, col.data(), K,
                             W, static_cast<std::size_t>(nd.out_ch),
                             dst + p0 * static_cast<std::size_t>(nd.out_ch),
                             static_cast<std::size_t>(nd.out_ch), false);
            }
        }
    }
    const std::size_t rows = static_cast<std::size_t>(out.b) * out.h * out.w;
    if (nd.relu)
        Ops<T>::bias_relu(rows, static_cast<std::size_t>(nd.out_ch), out.data.data(), B,
                          out.data.data());
    else
        Ops<T>::bias_add(rows, static_cast<std::size_t>(nd.out_ch), out.data.data(), B,
                         out.data.data());
}

template <typename T>
void conv_backward_node(const NodeSpec& nd, const ParamEntry& pe, const T* params,
                        const Tensor<T>& in, const Tensor<T>& out, Tensor<T>& g,
                        Tensor<T>* din, T* param_grads, std::vector<T>& col,
                        std::vector<T>& col2, std::vector<T>& tmp) {
    const std::size_t co = static_cast<std::size_t>(nd.out_ch);
    const std::size_t K = static_cast<std::size_t>(pe.k_rows);
    const std::size_t hw = static_cast<std::size_t>(in.h) * in.w;
    const std::size_t rows = static_cast<std::size_t>(out.b) * out.h * out.w;

    if (nd.relu) Ops<T>::relu_bwd(rows * co, out.data.data(), g.data.data());

    // Bias gradient: plain sequential accumulation.
    T* db = param_grads + pe.b_off;
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < co; ++c) db[c] += g.data[r * co + c];

    T* dW = param_grads + pe.w_off;
    const T* W = params + pe.w_off;

    // W^T for the input gradient.
    tmp.resize(co * K);
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t n = 0; n < co; ++n) tmp[n * K + k] = W[k * co + n];

    for (int bi = 0; bi < in.b; ++bi) {
        const T* src = in.item(bi);
        const T* gsrc = g.item(bi);
        if (nd.ksize == 1) {
            Ops<T>::gemm_tn(K, co, hw, src, K, gsrc, co, dW, co, true);
            if (din)
                Ops<T>::gemm(hw, K, co, gsrc, co, tmp.data(), K, din->item(bi), K, true);
        } else {
            col.resize(std::min(kTileRows, hw) * K);
            col2.resize(std::min(kTileRows, hw) * K);
            for (std::size_t p0 = 0; p0 < hw; p0 += kTileRows) {
                const std::size_t count = std::min(kTileRows, hw - p0);
                im2col3_range(src, in.h, in.w, nd.in_ch, p0, count, col.data());
                Ops<T>::gemm_tn(K, co, count, col.data(), K, gsrc + p0 * co, co, dW, co,
                                true);
                if (din) {
                    Ops<T>::gemm(count, K, co, gsrc + p0 * co, co, tmp.data(), K,
                                 col2.data(), K, false);
                    col2im3_range(col2.data(), in.h, in.w, nd.in_ch, p0, count,
                                  din->item(bi));
                }
            }
        }
    }
}

template <typename T>
void tconv_forward_node(const NodeSpec& nd, const ParamEntry& pe, const T* params,
                        const Tensor<T>& in, Tensor<T>& out, std::vector<T>& tmp) {
    require(in.c == nd.in_ch, "tconv channel mismatch");
    ensure_dims(out, in.b, 2 * in.h, 2 * in.w, nd.out_ch, false);
    const T* W = params + pe.w_off;
    const T* B = params + pe.b_off;
    const std::size_t co = static_cast<std::size_t>(nd.out_ch);
    const std::size_t ci = static_cast<std::size_t>(nd.in_ch);
    const std::size_t hw = static_cast<std::size_t>(in.h) * in.w;
    tmp.resize(hw * co);
    for (int bi = 0; bi < in.b; ++bi) {
        const T* src = in.item(bi);
        T* dst = out.item(bi);
        for (int t = 0; t < 4; ++t) {
            const int dy = t / 2, dx = t % 2;
            Ops<T>::gemm(hw, co, ci, src, ci, W + static_cast<std::size_t>(t) * ci * co,
                         co, tmp.data(), co, false);
            for (int y = 0; y < in.h; ++y)
                for (int x = 0; x < in.w; ++x) {
                    const std::size_t o =
                        ((static_cast<std::size_t>(2 * y + dy)) * out.w + (2 * x + dx)) * co;
                    const std::size_t s = (static_cast<std::size_t>(y) * in.w + x) * co;
                    for (std::size_t c = 0; c < co; ++c) dst[o + c] = tmp[s + c];
                }
        }
    }
    const std::size_t rows = static_cast<std::size_t>(out.b) * out.h * out.w;
    Ops<T>::bias_add(rows, co, out.data.data(), B, out.data.data());
}

template <typename T>
void tconv_backward_node(const NodeSpec& nd, const ParamEntry& pe, const T* params,
                         const Tensor<T>& in, const Tensor<T>& out, const Tensor<T>& g,
                         Tensor<T>* din, T* param_grads, std::vector<T>& col,
                         std::vector<T>& tmp) {
    const std::size_t co = static_cast<std::size_t>(nd.out_ch);
    const std::size_t ci = static_cast<std::size_t>(nd.in_ch);
    const std::size_t hw = static_cast<std::size_t>(in.h) * in.w;
    const std::size_t rows = static_cast<std::size_t>(out.b) * out.h * out.w;

    T* db = param_grads + pe.b_off;
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < co; ++c) db[c] += g.data[r * co + c];

    T* dW = param_grads + pe.w_off;
    const T* W = params + pe.w_off;
    col.resize(hw * co);  // gathered tap gradient
    tmp.resize(co * ci);  // W_t^T
    for (int bi = 0; bi < in.b; ++bi) {
        const T* src = in.item(bi);
        const T* gsrc = g.item(bi);
        for (int t = 0; t < 4; ++t) {
            const int dy = t / 2, dx = t % 2;
            for (int y = 0; y < in.h; ++y)
                for (int x = 0; x < in.w; ++x) {
                    const std::size_t o =
                        ((static_cast<std::size_t>(2 * y + dy)) * out.w + (2 * x + dx)) * co;
                    const std::size_t s = (static_cast<std::size_t>(y) * in.w + x) * co;
                    for (std::size_t c = 0; c < co; ++c) col[s + c] = gsrc[o + c];
                }
            const T* Wt = W + static_cast<std::size_t>(t) * ci * co;
            Ops<T>::gemm_tn(ci, co, hw, src, ci, col.data(), co,
                            dW + static_cast<std::size_t>(t) * ci * co, co, true);
            if (din) {
                for (std::size_t k = 0; k < ci; ++k)
                    for (std::size_t n = 0; n < co; ++n) tmp[n * ci + k] = Wt[k * co + n];
                Ops<T>::gemm(hw, ci, co, col.data(), co, tmp.data(), ci, din->item(bi),
                             ci, true);
            }
        }
    }
}

json kind_to_json(OpKind k) {
    switch (k) {
        case OpKind::kInput: return "input";
        case OpKind::kConv: return "conv";
        case OpKind::kTConv: return "tconv";
        case OpKind::kMaxPool: return "maxpool";
        case OpKind::kConcat: return "concat";
    }
    return "input";
}

OpKind kind_from_json(const std::string& s) {
    if (s == "input") return OpKind::kInput;
    if (s == "conv") return OpKind::kConv;
    if (s == "tconv") return OpKind::kTConv;
    if (s == "maxpool") return OpKind::kMaxPool;
    if (s == "concat") return OpKind::kConcat;
    fail("unknown node kind '", s, "'");
}

} // namespace

void validate_spec(const NetworkSpec& spec) {
    require(!spec.nodes.empty(), "empty network spec");
    for (std::size_t i = 0; i < spec.nodes.size(); ++i) {
        const NodeSpec& nd = spec.nodes[i];
        for (int in : nd.inputs)
            require(in >= 0 && static_cast<std::size_t>(in) < i,
                    "node ", i, " consumes a source that is not produced yet");
        switch (nd.kind) {
            case OpKind::kInput:
                require(nd.inputs.empty(), "input node with inputs");
                break;
            case OpKind::kConv:
                require(nd.inputs.size() == 1 && (nd.ksize == 1 || nd.ksize == 3),
                        "conv node ", i, " malformed");
                break;
            case OpKind::kTConv:
                require(nd.inputs.size() == 1, "tconv node ", i, " malformed");
                break;
            case OpKind::kMaxPool:
                require(nd.inputs.size() == 1, "maxpool node ", i, " malformed");
                break;
            case OpKind::kConcat:
                require(nd.inputs.size() >= 2, "concat node ", i, " needs >= 2 inputs");
                break;
        }
    }
    auto check_out = [&](int idx) {
        require(idx >= 0 && static_cast<std::size_t>(idx) < spec.nodes.size(),
                "output node index out of range");
    };
    check_out(spec.output_main);
    check_out(spec.output_aux);
    check_out(spec.input_relax);
    check_out(spec.input_symvf);
}

void to_json(json& j, const NetworkSpec& spec) {
    j = json::object();
    j["width"] = spec.width;
    j["input_relax"] = spec.input_relax;
    j["input_symvf"] = spec.input_symvf;
    j["output_main"] = spec.output_main;
    j["output_aux"] = spec.output_aux;
    json nodes = json::array();
    for (const NodeSpec& nd : spec.nodes) {
        json n;
        n["kind"] = kind_to_json(nd.kind);
        n["tag"] = nd.tag;
        n["inputs"] = nd.inputs;
        n["ksize"] = nd.ksize;
        n["in_ch"] = nd.in_ch;
        n["out_ch"] = nd.out_ch;
        n["relu"] = nd.relu;
        nodes.push_back(n);
    }
    j["nodes"] = nodes;
}

void from_json(const json& j, NetworkSpec& spec) {
    spec.width = j.at("width").get<int>();
    spec.input_relax = j.at("input_relax").get<int>();
    spec.input_symvf = j.at("input_symvf").get<int>();
    spec.output_main = j.at("output_main").get<int>();
    spec.output_aux = j.at("output_aux").get<int>();
    spec.nodes.clear();
    for (const auto& n : j.at("nodes")) {
        NodeSpec nd;
        nd.kind = kind_from_json(n.at("kind").get<std::string>());
        nd.tag = n.value("tag", std::string());
        nd.inputs = n.at("inputs").get<std::vector<int>>();
        nd.ksize = n.at("ksize").get<int>();
        nd.in_ch = n.at("in_ch").get<int>();
        nd.out_ch = n.at("out_ch").get<int>();
        nd.relu = n.at("relu").get<bool>();
        spec.nodes.push_back(nd);
    }
    validate_spec(spec);
}

NetworkSpec two_block_network(int c) {
    require(c >= 1, "network width must be >= 1");
    NetworkSpec s;
    s.width = c;
    auto input = [&](const std::string& tag, int ch) {
        NodeSpec nd;
        nd.kind = OpKind::kInput;
        nd.tag = tag;
        nd.out_ch = ch;
        s.nodes.push_back(nd);
        return static_cast<int>(s.nodes.size() - 1);
    };
    auto conv = [&](int in, int ks, int ci, int co, bool relu, const std::string& tag = "") {
        NodeSpec nd;
        nd.kind = OpKind::kConv;
        nd.tag = tag;
        nd.inputs = {in};
        nd.ksize = ks;
        nd.in_ch = ci;
        nd.out_ch = co;
        nd.relu = relu;
        s.nodes.push_back(nd);
        return static_cast<int>(s.nodes.size() - 1);
    };
    auto pool = [&](int in, int ch) {
        NodeSpec nd;
        nd.kind = OpKind::kMaxPool;
        nd.inputs = {in};
        nd.in_ch = ch;
        nd.out_ch = ch;
        s.nodes.push_back(nd);
        return static_cast<int>(s.nodes.size() - 1);
    };
    auto tconv = [&](int in, int ci, int co) {
        NodeSpec nd;
        nd.kind = OpKind::kTConv;
        nd.inputs = {in};
        nd.in_ch = ci;
        nd.out_ch = co;
        s.nodes.push_back(nd);
        return static_cast<int>(s.nodes.size() - 1);
    };
    auto concat = [&](std::vector<int> ins, int ch, const std::string& tag = "") {
        NodeSpec nd;
        nd.kind = OpKind::kConcat;
        nd.tag = tag;
        nd.inputs = std::move(ins);
        nd.out_ch = ch;
        s.nodes.push_back(nd);
        return static_cast<int>(s.nodes.size() - 1);
    };

    const int relax = input("relax", 3);
    const int symvf = input("symvf", 1);
    s.input_relax = relax;
    s.input_symvf = symvf;

    // Segmentation block: 3-level contracting/expanding pathway.
    const int e1 = conv(conv(relax, 3, 3, c, true), 3, c, c, true, "enc1");
    const int p1 = pool(e1, c);
    const int e2 = conv(conv(p1, 3, c, 2 * c, true), 3, 2 * c, 2 * c, true, "enc2");
    const int p2 = pool(e2, 2 * c);
    const int bot = conv(conv(p2, 3, 2 * c, 4 * c, true), 3, 4 * c, 4 * c, true, "bottom");
    const int u2 = tconv(bot, 4 * c, 2 * c);
    const int d2 = conv(conv(concat({u2, e2}, 4 * c), 3, 4 * c, 2 * c, true), 3, 2 * c,
                        2 * c, true, "dec2");
    const int u1 = tconv(d2, 2 * c, c);
    const int seg = conv(conv(concat({u1, e1}, 2 * c), 3, 2 * c, c, true), 3, c, c, true,
                         "seg_features");
    const int aux = conv(seg, 1, c, 1, false, "aux_out");

    // Reconstruction block: SyMVF enters at the front and again through
    // shortcut concats before later layers.
    const int r1 = conv(concat({symvf, seg}, c + 1), 3, c + 1, c, true);
    const int r2 = conv(r1, 3, c, c, true);
    const int r3 = conv(concat({symvf, r2}, c + 1), 3, c + 1, c, true);
    const int main_out = conv(concat({symvf, r3}, c + 1), 1, c + 1, 1, false, "main_out");

    s.output_main = main_out;
    s.output_aux = aux;
    validate_spec(s);
    return s;
}

ParamLayout make_layout(const NetworkSpec& spec) {
    ParamLayout lay;
    lay.per_node.resize(spec.nodes.size());
    std::size_t off = 0;
    for (std::size_t i = 0; i < spec.nodes.size(); ++i) {
        const NodeSpec& nd = spec.nodes[i];
        ParamEntry& pe = lay.per_node[i];
        if (nd.kind == OpKind::kConv)
            pe.k_rows = nd.ksize * nd.ksize * nd.in_ch;
        else if (nd.kind == OpKind::kTConv)
            pe.k_rows = 4 * nd.in_ch;
        else
            continue;
        pe.w_off = off;
        pe.w_count = static_cast<std::size_t>(pe.k_rows) * nd.out_ch;
        off += pe.w_count;
        pe.b_off = off;
        pe.b_count = static_cast<std::size_t>(nd.out_ch);
        off += pe.b_count;
    }
    lay.total = off;
    return lay;
}

template <typename T>
std::vector<T> init_params(const NetworkSpec& spec, std::uint64_t seed) {
    const ParamLayout lay = make_layout(spec);
    std::vector<T> params(lay.total, T(0));
    for (std::size_t i = 0; i < spec.nodes.size(); ++i) {
        const NodeSpec& nd = spec.nodes[i];
        const ParamEntry& pe = lay.per_node[i];
        if (pe.w_count == 0) continue;
        const double fan_in = static_cast<double>(pe.k_rows);
        const double sd = nd.relu ? std::sqrt(2.0 / fan_in) : std::sqrt(1.0 / fan_in);
        Rng rng(Rng::derive(seed, 0x494e4954u /*"INIT"*/, i));
        for (std::size_t k = 0; k < pe.w_count; ++k)
            params[pe.w_off + k] = static_cast<T>(sd * rng.next_normal());
        // biases stay zero
    }
    return params;
}

template <typename T>
void forward(const NetworkSpec& spec, const ParamLayout& layout, const T* params,
             Workspace<T>& ws, const Tensor<T>& relax, const Tensor<T>& symvf) {
    validate_spec(spec);
    require(relax.b == symvf.b && relax.h == symvf.h && relax.w == symvf.w,
            "relaxometry/SyMVF batch or spatial dims differ");
    require(relax.c == 3, "relaxometry input must have 3 channels");
    require(symvf.c == 1, "SyMVF input must have 1 channel");
    ws.act.resize(spec.nodes.size());
    ws.pool_arg.resize(spec.nodes.size());

    for (std::size_t i = 0; i < spec.nodes.size(); ++i) {
        const NodeSpec& nd = spec.nodes[i];
        Tensor<T>& out = ws.act[i];
        switch (nd.kind) {
            case OpKind::kInput: {
                const Tensor<T>& src = (static_cast<int>(i) == spec.input_relax) ? relax : symvf;
                require(src.c == nd.out_ch, "input channel mismatch at node ", i);
                out = src;
                break;
            }
            case OpKind::kConv:
                conv_forward_node(nd, layout.per_node[i], params, ws.act[nd.inputs[0]],
                                  out, ws.col);
                break;
            case OpKind::kTConv:
                tconv_forward_node(nd, layout.per_node[i], params, ws.act[nd.inputs[0]],
                                   out, ws.tmp);
                break;
            case OpKind::kMaxPool: {
                const Tensor<T>& in = ws.act[nd.inputs[0]];
                require(in.h % 2 == 0 && in.w % 2 == 0,
                        "maxpool needs even spatial dims, got ", in.h, "x", in.w);
                ensure_dims(out, in.b, in.h / 2, in.w / 2, in.c, false);
                auto& arg = ws.pool_arg[i];
                arg.assign(out.data.size(), 0);
                for (int bi = 0; bi < in.b; ++bi)
                    for (int y = 0; y < out.h; ++y)
                        for (int x = 0; x < out.w; ++x)
                            for (int ch = 0; ch < in.c; ++ch) {
                                T best = in.at(bi, 2 * y, 2 * x, ch);
                                std::uint8_t code = 0;
                                for (int t = 1; t < 4; ++t) {
                                    const T v = in.at(bi, 2 * y + t / 2, 2 * x + t % 2, ch);
                                    if (v > best) {
                                        best = v;
                                        code = static_cast<std::uint8_t>(t);
                                    }
                                }
                                out.at(bi, y, x, ch) = best;
                                arg[((static_cast<std::size_t>(bi) * out.h + y) * out.w + x) *
                                        in.c +
                                    ch] = code;
                            }
                break;
            }
            case OpKind::kConcat: {
                const Tensor<T>& first = ws.act[nd.inputs[0]];
                int total_c = 0;
                for (int src : nd.inputs) {
                    const Tensor<T>& t = ws.act[src];
                    require(t.b == first.b && t.h == first.h && t.w == first.w,
                            "concat spatial dims differ at node ", i);
                    total_c += t.c;
                }
                require(total_c == nd.out_ch, "concat channel total mismatch at node ", i);
                ensure_dims(out, first.b, first.h, first.w, total_c, false);
                const std::size_t rows = static_cast<std::size_t>(first.b) * first.h * first.w;
                std::size_t c_off = 0;
                for (int src : nd.inputs) {
                    const Tensor<T>& t = ws.act[src];
                    for (std::size_t r = 0; r < rows; ++r)
                        std::memcpy(out.data.data() + r * total_c + c_off,
                                    t.data.data() + r * static_cast<std::size_t>(t.c),
                                    static_cast<std::size_t>(t.c) * sizeof(T));
                    c_off += static_cast<std::size_t>(t.c);
                }
                break;
            }
        }
    }
    // Same-padding architecture law: outputs live on the input grid.
    const Tensor<T>& mo = ws.act[spec.output_main];
    require(mo.h == relax.h && mo.w == relax.w && mo.c == 1, "main output shape violation");
    const Tensor<T>& ao = ws.act[spec.output_aux];
    require(ao.h == relax.h && ao.w == relax.w && ao.c == 1, "aux output shape violation");
}

template <typename T>
void backward(const NetworkSpec& spec, const ParamLayout& layout, const T* params,
              Workspace<T>& ws, const Tensor<T>& dmain, const Tensor<T>& daux,
              T* param_grads) {
    ws.grad.resize(spec.nodes.size());
    for (std::size_t i = 0; i < spec.nodes.size(); ++i) {
        const Tensor<T>& a = ws.act[i];
        ensure_dims(ws.grad[i], a.b, a.h, a.w, a.c, true);
    }
    {
        Tensor<T>& gm = ws.grad[spec.output_main];
        require(dmain.data.size() == gm.data.size(), "dmain size mismatch");
        for (std::size_t k = 0; k < gm.data.size(); ++k) gm.data[k] += dmain.data[k];
        Tensor<T>& ga = ws.grad[spec.output_aux];
        require(daux.data.size() == ga.data.size(), "daux size mismatch");
        for (std::size_t k = 0; k < ga.data.size(); ++k) ga.data[k] += daux.data[k];
    }

    for (std::size_t ii = spec.nodes.size(); ii-- > 0;) {
        const NodeSpec& nd = spec.nodes[ii];
        Tensor<T>& g = ws.grad[ii];
        switch (nd.kind) {
            case OpKind::kInput:
                break;
            case OpKind::kConv: {
                const int src = nd.inputs[0];
                Tensor<T>* din =
                    spec.nodes[src].kind == OpKind::kInput ? nullptr : &ws.grad[src];
                conv_backward_node(nd, layout.per_node[ii], params, ws.act[src],
                                   ws.act[ii], g, din, param_grads, ws.col, ws.col2,
                                   ws.tmp);
                break;
            }
            case OpKind::kTConv: {
                const int src = nd.inputs[0];
                Tensor<T>* din =
                    spec.nodes[src].kind == OpKind::kInput ? nullptr : &ws.grad[src];
                tconv_backward_node(nd, layout.per_node[ii], params, ws.act[src],
                                    ws.act[ii], g, din, param_grads, ws.col, ws.tmp);
                break;
            }
            case OpKind::kMaxPool: {
                const int src = nd.inputs[0];
                Tensor<T>& din = ws.grad[src];
                const Tensor<T>& out = ws.act[ii];
                const auto& arg = ws.pool_arg[ii];
                for (int bi = 0; bi < out.b; ++bi)
                    for (int y = 0; y < out.h; ++y)
                        for (int x = 0; x < out.w; ++x)
                            for (int ch = 0; ch < out.c; ++ch) {
                                const std::uint8_t t =
                                    arg[((static_cast<std::size_t>(bi) * out.h + y) * out.w +
                                         x) *
                                            out.c +
                                        ch];
                                din.at(bi, 2 * y + t / 2, 2 * x + t % 2, ch) +=
                                    g.at(bi, y, x, ch);
                            }
                break;
            }
            case OpKind::kConcat: {
                const std::size_t rows =
                    static_cast<std::size_t>(g.b) * g.h * g.w;
                std::size_t c_off = 0;
                for (int src : nd.inputs) {
                    Tensor<T>& din = ws.grad[src];
                    const std::size_t cs = static_cast<std::size_t>(din.c);
                    for (std::size_t r = 0; r < rows; ++r) {
                        const T* gs = g.data.data() + r * static_cast<std::size_t>(g.c) + c_off;
                        T* dd = din.data.data() + r * cs;
                        for (std::size_t ch = 0; ch < cs; ++ch) dd[ch] += gs[ch];
                    }
                    c_off += cs;
                }
                break;
            }
        }
    }
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> forward_pair(const NetworkSpec& spec, const T* params,
                                             const Tensor<T>& relax,
                                             const Tensor<T>& symvf) {
    Workspace<T> ws;
    const ParamLayout lay = make_layout(spec);
    forward(spec, lay, params, ws, relax, symvf);
    return {ws.act[spec.output_main], ws.act[spec.output_aux]};
}

template std::vector<float> init_params<float>(const NetworkSpec&, std::uint64_t);
template std::vector<double> init_params<double>(const NetworkSpec&, std::uint64_t);
template void forward<float>(const NetworkSpec&, const ParamLayout&, const float*,
                             Workspace<float>&, const Tensor<float>&, const Tensor<float>&);
template void forward<double>(const NetworkSpec&, const ParamLayout&, const double*,
                              Workspace<double>&, const Tensor<double>&,
                              const Tensor<double>&);
template void backward<float>(const NetworkSpec&, const ParamLayout&, const float*,
                              Workspace<float>&, const Tensor<float>&, const Tensor<float>&,
                              float*);
template void backward<double>(const NetworkSpec&, const ParamLayout&, const double*,
                               Workspace<double>&, const Tensor<double>&,
                               const Tensor<double>&, double*);
template std::pair<Tensor<float>, Tensor<float>> forward_pair<float>(const NetworkSpec&,
                                                                     const float*,
                                                                     const Tensor<float>&,
                                                                     const Tensor<float>&);
template std::pair<Tensor<double>, Tensor<double>> forward_pair<double>(
    const NetworkSpec&, const double*, const Tensor<double>&, const Tensor<double>&);

} // namespace mvi::nn
