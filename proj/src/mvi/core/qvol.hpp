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

namespace mvi {

// qvol container: "<stem>.qvol" is a JSON header
//   {"shape":[nz,ny,nx],"voxel_mm":[dz,dy,dx],"dtype":"f32",
//    "order":"z-row-major","channel":"<name>"}
// and "<stem>.bin" is the raw little-endian float32 payload, no padding.
// Round trips are bit-exact.

/// `path` may be the stem, the .qvol header path, or the .bin payload path.
Volume load_volume(const std::filesystem::path& path);
void save_volume(const Volume& v, const std::filesystem::path& path);

/// Labels ride in a qvol payload as exact small integers (channel "labels").
/// The legend is external (dataset manifest); pass it in on load.
LabelVolume load_label_volume(const std::filesystem::path& path,
                              const std::map<std::int32_t, std::string>& legend);
void save_label_volume(const LabelVolume& lv, const std::filesystem::path& path);

/// Subject directory layout:
///   <root>/<subject-id>/{r1,r2,pd,bap,symvf,mtmvi,labels}.qvol(+.bin)
Subject load_subject(const std::filesystem::path& root, const std::string& id,
                     const std::map<std::int32_t, std::string>& legend);
void save_subject(const Subject& s, const std::filesystem::path& root);

} // namespace mvi
