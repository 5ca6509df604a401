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
#include "mvi/phantom/phantom.hpp"

#include "mvi/core/qvol.hpp"
#include "mvi/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace mvi::phantom {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr double kPi = 3.14159265358979323846;
constexpr double kSqrt2 = 1.41421356237309504880;

// Stream tags for per-subject substreams.
enum Tag : std::uint64_t { kTagGeom = 1, kTagR1, kTagR2, kTagPd, kTagMt };

const std::map<std::int32_t, std::string> kLegend = {
    {kBackground, "background/CSF"},
    {kCorticalGm, "cGM"},
    {kSubcorticalGm, "sGM"},
    {kWhiteMatter, "WM"},
    {kCorpusCallosum, "CC"},
};

const std::map<std::string, std::int32_t>& name_to_label() {
    static const std::map<std::string, std::int32_t> m = {
        {"background/CSF", kBackground}, {"cGM", kCorticalGm}, {"sGM", kSubcorticalGm},
        {"WM", kWhiteMatter},            {"CC", kCorpusCallosum},
    };
    return m;
}

struct Geometry {
    double cy, cx;          // in-plane center
    double r_brain;         // outer brain radius at mid-slice
    double r_wm;            // cGM/WM interface radius
    double blob_angle[3];
    double blob_dist[3];    // distance of sGM blob centers from center
    double blob_ry[3], blob_rx[3];
    double cc_half_h, cc_half_w;
};

Geometry draw_geometry(const PhantomConfig& cfg, Rng& rng) {
    const double ny = static_cast<double>(cfg.shape.ny);
    const double nx = static_cast<double>(cfg.shape.nx);
    const double j = cfg.geometry_jitter;
    Geometry g;
    g.cy = 0.5 * ny + 0.04 * ny * j * rng.next_normal();
    g.cx = 0.5 * nx + 0.04 * nx * j * rng.next_normal();
    const double base = 0.44 * std::min(ny, nx);
    g.r_brain = base * (1.0 + 0.5 * j * rng.next_normal());
    g.r_wm = 0.78 * g.r_brain * (1.0 + 0.3 * j * rng.next_normal());
    const double angles[3] = {0.5 * kPi, 7.0 * kPi / 6.0, 11.0 * kPi / 6.0};
    for (int b = 0; b < 3; ++b) {
        g.blob_angle[b] = angles[b] + 0.6 * j * rng.next_normal();
        g.blob_dist[b] = 0.45 * g.r_wm * (1.0 + 0.4 * j * rng.next_normal());
        g.blob_ry[b] = 0.16 * g.r_wm * (1.0 + 0.5 * j * rng.next_normal());
        g.blob_rx[b] = 0.20 * g.r_wm * (1.0 + 0.5 * j * rng.next_normal());
    }
    g.cc_half_h = 0.10 * g.r_wm * (1.0 + 0.3 * j * rng.next_normal());
    g.cc_half_w = 0.55 * g.r_wm * (1.0 + 0.2 * j * rng.next_normal());
    return g;
}

LabelVolume build_labels(const PhantomConfig& cfg, const Geometry& g) {
    LabelVolume lv;
    lv.shape = cfg.shape;
    lv.legend = kLegend;
    lv.labels.assign(cfg.shape.total(), kBackground);
    const std::size_t nz = cfg.shape.nz, ny = cfg.shape.ny, nx = cfg.shape.nx;
    for (std::size_t z = 0; z < nz; ++z) {
        // Smooth through-slice variation: radii shrink toward the end slices.
        const double zc = nz > 1 ? static_cast<double>(z) / (nz - 1) : 0.5;
        const double zmod = 0.82 + 0.18 * std::sin(kPi * std::clamp(zc, 0.02, 0.98));
        const double rb = g.r_brain * zmod;
        const double rw = g.r_wm * zmod;
        for (std::size_t y = 0; y < ny; ++y) {
            for (std::size_t x = 0; x < nx; ++x) {
                const double dy = static_cast<double>(y) - g.cy;
                const double dx = static_cast<double>(x) - g.cx;
                const double r = std::sqrt(dy * dy + dx * dx);
                std::int32_t lab = kBackground;
                if (r < rb) lab = kCorticalGm;
                if (r < rw) lab = kWhiteMatter;
                lv.labels[(z * ny + y) * nx + x] = lab;
            }
        }
        // sGM blobs, ellipses inside WM.
        for (int b = 0; b < 3; ++b) {
            const double by = g.cy + g.blob_dist[b] * zmod * std::sin(g.blob_angle[b]);
            const double bx = g.cx + g.blob_dist[b] * zmod * std::cos(g.blob_angle[b]);
            const double ry = std::max(1.5, g.blob_ry[b] * zmod);
            const double rx = std::max(1.5, g.blob_rx[b] * zmod);
            for (std::size_t y = 0; y < ny; ++y) {
                for (std::size_t x = 0; x < nx; ++x) {
                    const double ey = (static_cast<double>(y) - by) / ry;
                    const double ex = (static_cast<double>(x) - bx) / rx;
                    if (ey * ey + ex * ex <= 1.0) {
                        auto& lab = lv.labels[(z * ny + y) * nx + x];
                        if (lab == kWhiteMatter) lab = kSubcorticalGm;
                    }
                }
            }
        }
        // CC-like bridge through the deep WM, only over plain WM voxels.
        const double hh = std::max(1.5, g.cc_half_h * zmod);
        const double hw = std::max(3.0, g.cc_half_w * zmod);
        for (std::size_t y = 0; y < ny; ++y) {
            for (std::size_t x = 0; x < nx; ++x) {
                const double dy = static_cast<double>(y) - g.cy;
                const double dx = static_cast<double>(x) - g.cx;
                if (std::abs(dy) <= hh && std::abs(dx) <= hw) {
                    auto& lab = lv.labels[(z * ny + y) * nx + x];
                    if (lab == kWhiteMatter) lab = kCorpusCallosum;
                }
            }
        }
    }
    return lv;
}

/// Per-slice chamfer distance to the nearest GM voxel (labels cGM, sGM).
std::vector<double> gm_distance(const LabelVolume& lv) {
    const std::size_t nz = lv.shape.nz, ny = lv.shape.ny, nx = lv.shape.nx;
    const double inf = 1e30;
    std::vector<double> d(lv.labels.size(), inf);
    for (std::size_t i = 0; i < lv.labels.size(); ++i)
        if (lv.labels[i] == kCorticalGm || lv.labels[i] == kSubcorticalGm) d[i] = 0.0;
    auto idx = [&](std::size_t z, std::size_t y, std::size_t x) {
        return (z * ny + y) * nx + x;
    };
    for (std::size_t z = 0; z < nz; ++z) {
        for (std::size_t y = 0; y < ny; ++y) {
            for (std::size_t x = 0; x < nx; ++x) {
                double v = d[idx(z, y, x)];
                if (x > 0) v = std::min(v, d[idx(z, y, x - 1)] + 1.0);
                if (y > 0) {
                    v = std::min(v, d[idx(z, y - 1, x)] + 1.0);
                    if (x > 0) v = std::min(v, d[idx(z, y - 1, x - 1)] + kSqrt2);
                    if (x + 1 < nx) v = std::min(v, d[idx(z, y - 1, x + 1)] + kSqrt2);
                }
                d[idx(z, y, x)] = v;
            }
        }
        for (std::size_t yi = ny; yi-- > 0;) {
            for (std::size_t xi = nx; xi-- > 0;) {
                double v = d[idx(z, yi, xi)];
                if (xi + 1 < nx) v = std::min(v, d[idx(z, yi, xi + 1)] + 1.0);
                if (yi + 1 < ny) {
                    v = std::min(v, d[idx(z, yi + 1, xi)] + 1.0);
                    if (xi + 1 < nx) v = std::min(v, d[idx(z, yi + 1, xi + 1)] + kSqrt2);
                    if (xi > 0) v = std::min(v, d[idx(z, yi + 1, xi - 1)] + kSqrt2);
                }
                d[idx(z, yi, xi)] = v;
            }
        }
    }
    return d;
}

Volume smooth_indicator(const LabelVolume& lv) {
    // 3x3 in-plane box mean of the foreground indicator. A voxel reaches
    // probability 1 only when its full 8-neighborhood is foreground, so the
    // >0.95 brain mask never leaks outside the labeled tissue.
    Volume bap = make_volume(lv.shape, Channel::BAP, 0.0f, lv.voxel_mm);
    const std::size_t ny = lv.shape.ny, nx = lv.shape.nx;
    for (std::size_t z = 0; z < lv.shape.nz; ++z) {
        for (std::size_t y = 0; y < ny; ++y) {
            for (std::size_t x = 0; x < nx; ++x) {
                double acc = 0.0;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(y) + dy;
                        const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(x) + dx;
                        if (yy < 0 || xx < 0 || yy >= static_cast<std::ptrdiff_t>(ny) ||
                            xx >= static_cast<std::ptrdiff_t>(nx))
                            continue; // outside the image counts as background
                        if (lv.at(z, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx)) !=
                            kBackground)
                            acc += 1.0;
                    }
                }
                bap.at(z, y, x) = static_cast<float>(std::clamp(acc / 9.0, 0.0, 1.0));
            }
        }
    }
    return bap;
}

} // namespace

const std::map<std::int32_t, std::string>& tissue_legend() { return kLegend; }

void validate_config(const PhantomConfig& cfg) {
    require(cfg.n_subjects >= 2, "phantom needs at least 2 subjects");
    require(cfg.shape.nz >= 1, "phantom needs at least one slice");
    require(cfg.shape.ny >= 48 && cfg.shape.nx >= 48,
            "phantom in-plane shape too small for geometry (< 48 voxels)");
    require(cfg.noise_sd_mtmvi >= 0.0, "noise_sd_mtmvi must be >= 0");
    require(cfg.context_gain >= 0.0, "context_gain must be >= 0");
    require(cfg.geometry_jitter >= 0.0, "geometry_jitter must be >= 0");
    for (const auto& [lab, name] : kLegend) {
        (void)name;
        require(cfg.tissue_params.count(lab) != 0, "tissue_params missing label ", lab);
        const auto& tp = cfg.tissue_params.at(lab);
        require(tp.r1_mean > 0 && tp.r2_mean > 0 && tp.pd_mean > 0,
                "tissue means must be positive for label ", lab);
        require(tp.r1_sd >= 0 && tp.r2_sd >= 0 && tp.pd_sd >= 0,
                "tissue sds must be non-negative for label ", lab);
        require(tp.mvi_base >= 0, "mvi_base must be >= 0 for label ", lab);
    }
    require(cfg.tissue_params.at(kBackground).mvi_base == 0.0,
            "background mvi_base must be 0");
}

void to_json(json& j, const PhantomConfig& cfg) {
    j = json::object();
    j["n_subjects"] = cfg.n_subjects;
    j["shape"] = {cfg.shape.nz, cfg.shape.ny, cfg.shape.nx};
    j["seed"] = cfg.seed;
    j["noise_sd_mtmvi"] = cfg.noise_sd_mtmvi;
    j["context_gain"] = cfg.context_gain;
    j["geometry_jitter"] = cfg.geometry_jitter;
    json tp = json::object();
    for (const auto& [lab, p] : cfg.tissue_params) {
        json e;
        e["r1_mean"] = p.r1_mean;
        e["r1_sd"] = p.r1_sd;
        e["r2_mean"] = p.r2_mean;
        e["r2_sd"] = p.r2_sd;
        e["pd_mean"] = p.pd_mean;
        e["pd_sd"] = p.pd_sd;
        e["mvi_base"] = p.mvi_base;
        tp[kLegend.at(lab)] = e;
    }
    j["tissue_params"] = tp;
}

void from_json(const json& j, PhantomConfig& cfg) {
    cfg.n_subjects = j.at("n_subjects").get<int>();
    const auto sh = j.at("shape");
    require(sh.is_array() && sh.size() == 3, "phantom shape must have 3 entries");
    cfg.shape = {sh[0].get<std::size_t>(), sh[1].get<std::size_t>(), sh[2].get<std::size_t>()};
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.noise_sd_mtmvi = j.at("noise_sd_mtmvi").get<double>();
    cfg.context_gain = j.at("context_gain").get<double>();
    cfg.geometry_jitter = j.at("geometry_jitter").get<double>();
    cfg.tissue_params.clear();
    for (const auto& [name, e] : j.at("tissue_params").items()) {
        auto it = name_to_label().find(name);
        require(it != name_to_label().end(), "unknown tissue name '", name, "' in config");
        TissueParams p;
        p.r1_mean = e.at("r1_mean").get<double>();
        p.r1_sd = e.at("r1_sd").get<double>();
        p.r2_mean = e.at("r2_mean").get<double>();
        p.r2_sd = e.at("r2_sd").get<double>();
        p.pd_mean = e.at("pd_mean").get<double>();
        p.pd_sd = e.at("pd_sd").get<double>();
        p.mvi_base = e.at("mvi_base").get<double>();
        cfg.tissue_params[it->second] = p;
    }
}

float symvf_standin(float r1, float r2, float pd) {
    // Fixed smooth closed form scaled to (0, 0.6): logistic in a linear
    // score that rises with R1 and R2 and falls with PD. Strictly pixel-wise.
    const double u = 2.0 * static_cast<double>(r1) + 0.08 * static_cast<double>(r2) -
                     0.06 * static_cast<double>(pd) + 0.6;
    return static_cast<float>(0.6 / (1.0 + std::exp(-u)));
}

std::pair<Subject, GroundTruth> generate_subject(const PhantomConfig& cfg, int index) {
    validate_config(cfg);
    require(index >= 0 && index < cfg.n_subjects, "subject index ", index,
            " out of range [0,", cfg.n_subjects, ")");

    const std::uint64_t subject_key = Rng::derive(cfg.seed, 0x5355424au /*"SUBJ"*/,
                                                  static_cast<std::uint64_t>(index));
    Rng geom_rng(Rng::derive(subject_key, kTagGeom));
    const Geometry geom = draw_geometry(cfg, geom_rng);
    LabelVolume labels = build_labels(cfg, geom);

    const std::size_t n = cfg.shape.total();
    Volume r1 = make_volume(cfg.shape, Channel::R1);
    Volume r2 = make_volume(cfg.shape, Channel::R2);
    Volume pd = make_volume(cfg.shape, Channel::PD);
    Rng r1_rng(Rng::derive(subject_key, kTagR1));
    Rng r2_rng(Rng::derive(subject_key, kTagR2));
    Rng pd_rng(Rng::derive(subject_key, kTagPd));
    for (std::size_t i = 0; i < n; ++i) {
        const TissueParams& tp = cfg.tissue_params.at(labels.labels[i]);
        r1.data[i] = static_cast<float>(std::max(0.01, tp.r1_mean + tp.r1_sd * r1_rng.next_normal()));
        r2.data[i] = static_cast<float>(std::max(0.01, tp.r2_mean + tp.r2_sd * r2_rng.next_normal()));
        pd.data[i] = static_cast<float>(std::max(1.0, tp.pd_mean + tp.pd_sd * pd_rng.next_normal()));
    }

    // True index: tissue base plus the neighborhood term. Only WM-class
    // voxels receive context, scaled by the subject-wide maximum distance.
    Volume mvi_true = make_volume(cfg.shape, Channel::other);
    mvi_true.channel_label = "mvi_true";
    const std::vector<double> dist = gm_distance(labels);
    double dmax = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        if (labels.labels[i] == kWhiteMatter || labels.labels[i] == kCorpusCallosum)
            dmax = std::max(dmax, dist[i]);
    for (std::size_t i = 0; i < n; ++i) {
        const std::int32_t lab = labels.labels[i];
        double v = cfg.tissue_params.at(lab).mvi_base;
        if ((lab == kWhiteMatter || lab == kCorpusCallosum) && dmax > 0.0)
            v += cfg.context_gain * (dist[i] / dmax);
        mvi_true.data[i] = static_cast<float>(v);
    }

    Volume mtmvi = make_volume(cfg.shape, Channel::MTMVI);
    Rng mt_rng(Rng::derive(subject_key, kTagMt));
    for (std::size_t i = 0; i < n; ++i) {
        const double v = static_cast<double>(mvi_true.data[i]) +
                         cfg.noise_sd_mtmvi * mt_rng.next_normal();
        mtmvi.data[i] = static_cast<float>(std::max(0.0, v));
    }

    Volume symvf = make_volume(cfg.shape, Channel::SyMVF);
    for (std::size_t i = 0; i < n; ++i)
        symvf.data[i] = symvf_standin(r1.data[i], r2.data[i], pd.data[i]);

    Subject s;
    s.id = "S" + std::string(index < 10 ? "00" : index < 100 ? "0" : "") + std::to_string(index);
    s.volumes.emplace(Channel::R1, std::move(r1));
    s.volumes.emplace(Channel::R2, std::move(r2));
    s.volumes.emplace(Channel::PD, std::move(pd));
    s.volumes.emplace(Channel::BAP, smooth_indicator(labels));
    s.volumes.emplace(Channel::SyMVF, std::move(symvf));
    s.volumes.emplace(Channel::MTMVI, std::move(mtmvi));
    s.labels = labels;
    validate_subject(s);

    GroundTruth gt{std::move(mvi_true), std::move(labels)};
    return {std::move(s), std::move(gt)};
}

DatasetIndex write_dataset(const PhantomConfig& cfg, const fs::path& root, bool force) {
    validate_config(cfg);
    if (fs::exists(root) && !fs::is_empty(root))
        require(force, "output directory ", root.string(),
                " is not empty; pass --force to overwrite");
    fs::create_directories(root);

    DatasetIndex ds;
    ds.root = root;
    ds.legend = kLegend;
    ds.config = cfg;
    for (int i = 0; i < cfg.n_subjects; ++i) {
        auto [subject, gt] = generate_subject(cfg, i);
        save_subject(subject, root);
        save_volume(gt.mvi_true, root / subject.id / "mvi_true");
        ds.subject_ids.push_back(subject.id);
    }

    json j;
    j["config"] = cfg;
    j["subjects"] = ds.subject_ids;
    json legend = json::object();
    for (const auto& [lab, name] : kLegend) legend[std::to_string(lab)] = name;
    j["legend"] = legend;
    std::ofstream f(root / "dataset.json", std::ios::trunc);
    require(f.good(), "cannot write dataset manifest");
    f << j.dump(2) << "\n";
    require(f.good(), "I/O failure writing dataset manifest");
    return ds;
}

DatasetIndex load_dataset(const fs::path& root) {
    const fs::path manifest = root / "dataset.json";
    require(fs::exists(manifest), "dataset manifest not found: ", manifest.string());
    std::ifstream f(manifest);
    json j;
    f >> j;
    DatasetIndex ds;
    ds.root = root;
    ds.config = j.at("config").get<PhantomConfig>();
    ds.subject_ids = j.at("subjects").get<std::vector<std::string>>();
    for (const auto& [k, v] : j.at("legend").items())
        ds.legend[std::stoi(k)] = v.get<std::string>();
    return ds;
}

Volume load_ground_truth(const DatasetIndex& ds, const std::string& id) {
    return load_volume(ds.root / id / "mvi_true");
}

} // namespace mvi::phantom
