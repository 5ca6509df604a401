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

#include "mvi/common.hpp"

#include <vector>

namespace mvi::nn {

/// Dense NHWC tensor. float in production, double in gradient-check mode.
template <typename T>
struct Tensor {
    int b = 0, h = 0, w = 0, c = 0;
    std::vector<T> data;

    void resize(int nb, int nh, int nw, int nc) {
        b = nb;
        h = nh;
        w = nw;
        c = nc;
        data.assign(static_cast<std::size_t>(nb) * nh * nw * nc, T(0));
    }
    std::size_t item_size() const {
        return static_cast<std::size_t>(h) * w * c;
    }
    T* item(int bi) { return data.data() + static_cast<std::size_t>(bi) * item_size(); }
    const T* item(int bi) const {
        return data.data() + static_cast<std::size_t>(bi) * item_size();
    }
    T& at(int bi, int y, int x, int ch) {
        return data[((static_cast<std::size_t>(bi) * h + y) * w + x) * c + ch];
    }
    T at(int bi, int y, int x, int ch) const {
        return data[((static_cast<std::size_t>(bi) * h + y) * w + x) * c + ch];
    }
};

} // namespace mvi::nn
