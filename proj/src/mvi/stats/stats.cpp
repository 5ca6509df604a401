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
#include "mvi/stats/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace mvi::stats {
namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Average ranks of |d| (1-based), average on ties.
std::vector<double> abs_ranks(const std::vector<double>& d) {
    const std::size_t n = d.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(d[a]) < std::abs(d[b]);
    });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
        const double avg = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

/// P(W+ <= w) for tie-free integer ranks 1..n, by counting subsets of
/// {1..n} with sum <= w. Counts fit exactly in double for n <= 30.
double exact_cdf_le(std::size_t n, double w) {
    const std::size_t max_sum = n * (n + 1) / 2;
    std::vector<double> count(max_sum + 1, 0.0);
    count[0] = 1.0;
    for (std::size_t r = 1; r <= n; ++r)
        for (std::size_t s = max_sum; s >= r; --s) count[s] += count[s - r];
    const std::size_t wi = w < 0 ? 0 : std::min(max_sum, static_cast<std::size_t>(std::floor(w)));
    double acc = 0.0;
    if (w >= 0)
        for (std::size_t s = 0; s <= wi; ++s) acc += count[s];
    return acc / std::ldexp(1.0, static_cast<int>(n)); // / 2^n
}

} // namespace

double pearson(std::span<const double> x, std::span<const double> y) {
    require(x.size() == y.size(), "pearson: length mismatch");
    const std::size_t n = x.size();
    require(n >= 2, "pearson needs at least 2 observations");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    require(sxx > 0 && syy > 0, "pearson undefined: zero variance");
    return sxy / std::sqrt(sxx * syy);
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), "wilcoxon: length mismatch");
    std::vector<double> d;
    d.reserve(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double di = a[i] - b[i];
        if (di != 0.0) d.push_back(di); // zero differences dropped
    }
    require(d.size() >= 5, "wilcoxon needs at least 5 nonzero differences, got ", d.size());

    const std::vector<double> ranks = abs_ranks(d);
    WilcoxonResult res;
    res.n = d.size();
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (d[i] > 0)
            res.w_plus += ranks[i];
        else
            res.w_minus += ranks[i];
    }
    res.w = std::min(res.w_plus, res.w_minus);

    bool ties = false;
    {
        std::vector<double> mags;
        mags.reserve(d.size());
        for (double di : d) mags.push_back(std::abs(di));
        std::sort(mags.begin(), mags.end());
        for (std::size_t i = 1; i < mags.size(); ++i)
            if (mags[i] == mags[i - 1]) ties = true;
    }

    const std::size_t n = d.size();
    if (!ties && n <= 30) {
        res.exact = true;
        res.p = std::min(1.0, 2.0 * exact_cdf_le(n, res.w));
    } else {
        res.exact = false;
        const double dn = static_cast<double>(n);
        const double mu = dn * (dn + 1.0) / 4.0;
        double tie_corr = 0.0;
        {
            std::vector<double> mags;
            mags.reserve(n);
            for (double di : d) mags.push_back(std::abs(di));
            std::sort(mags.begin(), mags.end());
            std::size_t i = 0;
            while (i < n) {
                std::size_t j = i;
                while (j + 1 < n && mags[j + 1] == mags[i]) ++j;
                const double t = static_cast<double>(j - i + 1);
                tie_corr += t * t * t - t;
                i = j + 1;
            }
        }
        const double var = dn * (dn + 1.0) * (2.0 * dn + 1.0) / 24.0 - tie_corr / 48.0;
        require(var > 0, "wilcoxon variance degenerate");
        const double z = (res.w - mu + 0.5) / std::sqrt(var); // continuity correction
        res.p = std::min(1.0, 2.0 * normal_cdf(z));
    }
    return res;
}

double percentile(std::vector<double> values, double p) {
    require(!values.empty(), "percentile of empty data");
    require(p >= 0.0 && p <= 1.0, "percentile fraction out of range");
    std::sort(values.begin(), values.end());
    if (values.size() == 1) return values[0];
    const double h = (static_cast<double>(values.size()) - 1.0) * p;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double median(std::vector<double> values) { return percentile(std::move(values), 0.5); }

BoxStats box_stats(std::vector<double> values) {
    require(!values.empty(), "box stats of empty data");
    BoxStats bs;
    bs.n = values.size();
    std::sort(values.begin(), values.end());
    bs.median = percentile(values, 0.5);
    bs.q1 = percentile(values, 0.25);
    bs.q3 = percentile(values, 0.75);
    const double iqr = bs.q3 - bs.q1;
    const double lo_fence = bs.q1 - 1.5 * iqr;
    const double hi_fence = bs.q3 + 1.5 * iqr;
    bs.lo = values.back();
    bs.hi = values.front();
    for (double v : values) {
        if (v >= lo_fence) {
            bs.lo = v;
            break;
        }
    }
    for (std::size_t i = values.size(); i-- > 0;) {
        if (values[i] <= hi_fence) {
            bs.hi = values[i];
            break;
        }
    }
    return bs;
}

std::vector<RoiStatRow> roi_means(const std::string& subject_id, const prep::RoiSet& rois,
                                  const Volume& mtmvi, const Volume& symvf,
                                  const Volume& genmvi) {
    std::vector<RoiStatRow> rows;
    rows.reserve(rois.local_rois.size());
    for (const auto& lr : rois.local_rois) {
        if (lr.mask.count() == 0) continue; // dropped upstream, guard anyway
        RoiStatRow row;
        row.subject_id = subject_id;
        row.roi_name = lr.name;
        row.region = lr.region;
        row.mean_mtmvi = mean_over_mask(mtmvi, lr.mask);
        row.mean_symvf = mean_over_mask(symvf, lr.mask);
        row.mean_genmvi = mean_over_mask(genmvi, lr.mask);
        row.delta_sy = std::abs(row.mean_symvf - row.mean_mtmvi);
        row.delta_gen = std::abs(row.mean_genmvi - row.mean_mtmvi);
        rows.push_back(std::move(row));
    }
    return rows;
}

RoiAnalysis run_roi_analysis(const std::vector<RoiStatRow>& rows, Pairing pairing) {
    require(!rows.empty(), "no ROI rows to analyze");
    {
        std::map<std::string, int> subjects;
        for (const auto& r : rows) subjects[r.subject_id] += 1;
        require(subjects.size() >= 2, "ROI analysis needs rows from at least 2 subjects");
    }

    RoiAnalysis out;
    out.rows = rows;
    const std::vector<std::string> regions = {"cGM", "sGM", "WM", "WB"};
    for (const std::string& region : regions) {
        std::vector<const RoiStatRow*> sel;
        for (const auto& r : rows)
            if (region == "WB" || r.region == region) sel.push_back(&r);
        require(!sel.empty(), "region ", region, " has no rows");

        auto summarize = [&](auto getter) {
            std::vector<double> v;
            v.reserve(sel.size());
            for (const auto* r : sel) v.push_back(getter(*r));
            MetricSummary ms;
            ms.min = *std::min_element(v.begin(), v.end());
            ms.max = *std::max_element(v.begin(), v.end());
            ms.median = median(std::move(v));
            return ms;
        };

        RegionTable rt;
        rt.region = region;
        rt.n_rows = sel.size();
        rt.mtmvi = summarize([](const RoiStatRow& r) { return r.mean_mtmvi; });
        rt.symvf = summarize([](const RoiStatRow& r) { return r.mean_symvf; });
        rt.genmvi = summarize([](const RoiStatRow& r) { return r.mean_genmvi; });
        rt.delta_sy = summarize([](const RoiStatRow& r) { return r.delta_sy; });
        rt.delta_gen = summarize([](const RoiStatRow& r) { return r.delta_gen; });

        std::vector<double> dsy, dgen;
        if (pairing == Pairing::pooled) {
            for (const auto* r : sel) {
                dsy.push_back(r->delta_sy);
                dgen.push_back(r->delta_gen);
            }
        } else {
            // Aggregate within subject first, then pair across subjects.
            std::map<std::string, std::pair<double, std::size_t>> acc_sy, acc_gen;
            for (const auto* r : sel) {
                acc_sy[r->subject_id].first += r->delta_sy;
                acc_sy[r->subject_id].second += 1;
                acc_gen[r->subject_id].first += r->delta_gen;
                acc_gen[r->subject_id].second += 1;
            }
            for (const auto& [id, a] : acc_sy) {
                dsy.push_back(a.first / static_cast<double>(a.second));
                const auto& g = acc_gen.at(id);
                dgen.push_back(g.first / static_cast<double>(g.second));
            }
        }
        try {
            rt.p_delta = wilcoxon_signed_rank(dsy, dgen).p;
        } catch (const Error&) {
            rt.p_delta = 1.0;
            rt.p_degenerate = true;
        }
        out.regions.push_back(std::move(rt));
    }

    std::vector<double> mt, sy, gen;
    mt.reserve(rows.size());
    for (const auto& r : rows) {
        mt.push_back(r.mean_mtmvi);
        sy.push_back(r.mean_symvf);
        gen.push_back(r.mean_genmvi);
    }
    out.pooled_r_symvf = pearson(mt, sy);
    out.pooled_r_genmvi = pearson(mt, gen);
    return out;
}

PixelAnalysis run_pixel_analysis(const std::vector<SubjectMaps>& subjects) {
    require(subjects.size() >= 2, "pixel analysis needs at least 2 subjects");
    PixelAnalysis out;
    const std::vector<std::string> roi_names = {"cGM", "sGM", "WM", "WB", "CC"};

    for (const auto& sm : subjects) {
        require(sm.rois && sm.mtmvi && sm.symvf && sm.genmvi, "incomplete subject maps");
        for (const std::string& rn : roi_names) {
            const Mask* mask = nullptr;
            if (rn == "cGM") mask = &sm.rois->roi_cgm;
            else if (rn == "sGM") mask = &sm.rois->roi_sgm;
            else if (rn == "WM") mask = &sm.rois->roi_wm;
            else if (rn == "WB") mask = &sm.rois->roi_wb;
            else mask = &sm.rois->roi_cc;

            std::vector<double> mt, sy, gen;
            for (std::size_t i = 0; i < mask->bits.size(); ++i) {
                if (!mask->bits[i]) continue;
                mt.push_back(static_cast<double>(sm.mtmvi->data[i]));
                sy.push_back(static_cast<double>(sm.symvf->data[i]));
                gen.push_back(static_cast<double>(sm.genmvi->data[i]));
            }
            require(mt.size() >= 2, "ROI ", rn, " of subject ", sm.subject_id,
                    " has fewer than 2 pixels");
            PixelCorrRow row;
            row.subject_id = sm.subject_id;
            row.roi = rn;
            row.n_pixels = mt.size();
            row.r_symvf = pearson(mt, sy);
            row.r_genmvi = pearson(mt, gen);
            out.rows.push_back(std::move(row));
        }
    }

    for (const std::string& rn : roi_names) {
        std::vector<double> rs, rg;
        for (const auto& row : out.rows)
            if (row.roi == rn) {
                rs.push_back(row.r_symvf);
                rg.push_back(row.r_genmvi);
            }
        RoiBox box;
        box.roi = rn;
        box.symvf = box_stats(rs);
        box.genmvi = box_stats(rg);
        try {
            box.p = wilcoxon_signed_rank(rg, rs).p;
        } catch (const Error&) {
            // Identical columns leave nothing to rank: report "no difference".
            box.p = 1.0;
            box.degenerate = true;
        }
        out.boxes.push_back(std::move(box));
    }
    return out;
}

} // namespace mvi::stats
