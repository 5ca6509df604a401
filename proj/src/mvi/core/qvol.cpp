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
#include "mvi/core/qvol.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace mvi {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path stem_of(const fs::path& path) {
    fs::path p = path;
    if (p.extension() == ".qvol" || p.extension() == ".bin") p.replace_extension();
    return p;
}

const std::array<std::pair<Channel, const char*>, 7> kSubjectFiles = {{
    {Channel::R1, "r1"},
    {Channel::R2, "r2"},
    {Channel::PD, "pd"},
    {Channel::BAP, "bap"},
    {Channel::SyMVF, "symvf"},
    {Channel::MTMVI, "mtmvi"},
    {Channel::other, "labels"},
}};

} // namespace

Volume load_volume(const fs::path& path) {
    const fs::path stem = stem_of(path);
    const fs::path hdr_path = fs::path(stem).concat(".qvol");
    const fs::path bin_path = fs::path(stem).concat(".bin");
    require(fs::exists(hdr_path), "missing header file ", hdr_path.string());
    require(fs::exists(bin_path), "missing payload file ", bin_path.string());

    std::ifstream hf(hdr_path);
    require(hf.good(), "cannot open ", hdr_path.string());
    json j;
    try {
        hf >> j;
    } catch (const std::exception& e) {
        fail("malformed qvol header ", hdr_path.string(), ": ", e.what());
    }
    require(j.contains("shape") && j.contains("dtype") && j.contains("order"),
            "qvol header missing required fields: ", hdr_path.string());
    require(j["dtype"].get<std::string>() == "f32", "unknown dtype '",
            j["dtype"].get<std::string>(), "' in ", hdr_path.string());
    require(j["order"].get<std::string>() == "z-row-major", "unknown ordering in ",
            hdr_path.string());
    const auto sh = j["shape"];
    require(sh.is_array() && sh.size() == 3, "qvol shape must have 3 entries");
    for (const auto& d : sh)
        require(d.is_number_integer() && d.get<std::int64_t>() > 0,
                "qvol shape entries must be positive integers");

    Volume v;
    v.shape = {sh[0].get<std::size_t>(), sh[1].get<std::size_t>(), sh[2].get<std::size_t>()};
    if (j.contains("voxel_mm")) {
        const auto vm = j["voxel_mm"];
        require(vm.is_array() && vm.size() == 3, "voxel_mm must have 3 entries");
        for (int i = 0; i < 3; ++i) v.voxel_mm[i] = vm[i].get<double>();
    }
    v.channel_label = j.value("channel", std::string("other"));
    v.channel = channel_from_string(v.channel_label);

    const std::size_t expect_bytes = v.shape.total() * sizeof(float);
    const std::size_t actual_bytes = fs::file_size(bin_path);
    require(actual_bytes == expect_bytes, "payload ", bin_path.string(), " holds ",
            actual_bytes, " bytes, header declares ", expect_bytes);

    v.data.resize(v.shape.total());
    std::ifstream bf(bin_path, std::ios::binary);
    require(bf.good(), "cannot open ", bin_path.string());
    bf.read(reinterpret_cast<char*>(v.data.data()), static_cast<std::streamsize>(expect_bytes));
    require(bf.gcount() == static_cast<std::streamsize>(expect_bytes), "short read on ",
            bin_path.string());

    validate_volume(v);
    return v;
}

void save_volume(const Volume& v, const fs::path& path) {
    validate_volume(v);
    const fs::path stem = stem_of(path);
    const fs::path hdr_path = fs::path(stem).concat(".qvol");
    const fs::path bin_path = fs::path(stem).concat(".bin");
    if (stem.has_parent_path()) fs::create_directories(stem.parent_path());

    json j;
    j["shape"] = {v.shape.nz, v.shape.ny, v.shape.nx};
    j["voxel_mm"] = {v.voxel_mm[0], v.voxel_mm[1], v.voxel_mm[2]};
    j["dtype"] = "f32";
    j["order"] = "z-row-major";
    j["channel"] = v.channel == Channel::other ? v.channel_label
                                               : std::string(channel_to_string(v.channel));

    std::ofstream hf(hdr_path, std::ios::trunc);
    require(hf.good(), "cannot write ", hdr_path.string());
    hf << j.dump() << "\n";
    require(hf.good(), "I/O failure writing ", hdr_path.string());

    std::ofstream bf(bin_path, std::ios::binary | std::ios::trunc);
    require(bf.good(), "cannot write ", bin_path.string());
    bf.write(reinterpret_cast<const char*>(v.data.data()),
             static_cast<std::streamsize>(v.data.size() * sizeof(float)));
    require(bf.good(), "I/O failure writing ", bin_path.string());
}

LabelVolume load_label_volume(const fs::path& path,
                              const std::map<std::int32_t, std::string>& legend) {
    const Volume raw = load_volume(path);
    LabelVolume lv;
    lv.shape = raw.shape;
    lv.voxel_mm = raw.voxel_mm;
    lv.legend = legend;
    lv.labels.resize(raw.data.size());
    for (std::size_t i = 0; i < raw.data.size(); ++i) {
        const float f = raw.data[i];
        const float r = std::nearbyintf(f);
        require(f == r && r >= 0.0f, "label payload holds non-integer value ", f,
                " at index ", i);
        lv.labels[i] = static_cast<std::int32_t>(r);
    }
    validate_labels(lv);
    return lv;
}

void save_label_volume(const LabelVolume& lv, const fs::path& path) {
    validate_labels(lv);
    Volume raw;
    raw.shape = lv.shape;
    raw.voxel_mm = lv.voxel_mm;
    raw.channel = Channel::other;
    raw.channel_label = "labels";
    raw.data.resize(lv.labels.size());
    for (std::size_t i = 0; i < lv.labels.size(); ++i)
        raw.data[i] = static_cast<float>(lv.labels[i]);
    save_volume(raw, path);
}

Subject load_subject(const fs::path& root, const std::string& id,
                     const std::map<std::int32_t, std::string>& legend) {
    const fs::path dir = root / id;
    require(fs::is_directory(dir), "subject directory not found: ", dir.string());
    Subject s;
    s.id = id;
    for (const auto& [ch, name] : kSubjectFiles) {
        if (ch == Channel::other) {
            s.labels = load_label_volume(dir / name, legend);
        } else {
            Volume v = load_volume(dir / name);
            require(v.channel == ch, "channel mismatch in ", (dir / name).string());
            s.volumes.emplace(ch, std::move(v));
        }
    }
    validate_subject(s);
    return s;
}

void save_subject(const Subject& s, const fs::path& root) {
    validate_subject(s);
    const fs::path dir = root / s.id;
    fs::create_directories(dir);
    for (const auto& [ch, name] : kSubjectFiles) {
        if (ch == Channel::other)
            save_label_volume(s.labels, dir / name);
        else
            save_volume(s.channel(ch), dir / name);
    }
}

} // namespace mvi
