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
#include "mvi/stats/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mvi::stats {
namespace {

namespace fs = std::filesystem;

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream f(p, std::ios::trunc | std::ios::binary);
    require(f.good(), "cannot write ", p.string());
    f << content;
    require(f.good(), "I/O failure writing ", p.string());
}

std::string coord(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

struct AxisMap {
    double lo, hi, px0, px1;
    double operator()(double v) const {
        return px0 + (v - lo) / (hi - lo) * (px1 - px0);
    }
};

std::string scatter_panel(const std::vector<RoiStatRow>& rows, bool genmvi, double x0,
                          double r_value) {
    double lo = 1e300, hi = -1e300;
    for (const auto& r : rows) {
        const double y = genmvi ? r.mean_genmvi : r.mean_symvf;
        lo = std::min({lo, r.mean_mtmvi, y});
        hi = std::max({hi, r.mean_mtmvi, y});
    }
    if (hi <= lo) hi = lo + 1.0;
    const double pad = 0.05 * (hi - lo);
    AxisMap xm{lo - pad, hi + pad, x0 + 45.0, x0 + 345.0};
    AxisMap ym{lo - pad, hi + pad, 345.0, 45.0};

    std::ostringstream os;
    os << "<rect x=\"" << coord(x0 + 45) << "\" y=\"45\" width=\"300\" height=\"300\" "
          "fill=\"none\" stroke=\"black\"/>\n";
    // identity line
    os << "<line x1=\"" << coord(xm(lo)) << "\" y1=\"" << coord(ym(lo)) << "\" x2=\""
       << coord(xm(hi)) << "\" y2=\"" << coord(ym(hi))
       << "\" stroke=\"#bbbbbb\" stroke-dasharray=\"4 3\"/>\n";
    for (const auto& r : rows) {
        const double y = genmvi ? r.mean_genmvi : r.mean_symvf;
        os << "<circle cx=\"" << coord(xm(r.mean_mtmvi)) << "\" cy=\"" << coord(ym(y))
           << "\" r=\"2\" fill=\"" << (genmvi ? "#c0392b" : "#2c3e50")
           << "\" fill-opacity=\"0.6\"/>\n";
    }
    os << "<text x=\"" << coord(x0 + 60) << "\" y=\"70\" font-size=\"14\">"
       << (genmvi ? "GenMVI" : "SyMVF") << " vs MTMVI, r=" << coord(r_value) << "</text>\n";
    os << "<text x=\"" << coord(x0 + 150) << "\" y=\"385\" font-size=\"12\">MTMVI ROI mean"
       << "</text>\n";
    return os.str();
}

std::string svg_scatter(const RoiAnalysis& roi) {
    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"400\" "
          "viewBox=\"0 0 800 400\">\n";
    os << scatter_panel(roi.rows, false, 0.0, roi.pooled_r_symvf);
    os << scatter_panel(roi.rows, true, 400.0, roi.pooled_r_genmvi);
    os << "</svg>\n";
    return os.str();
}

void draw_box(std::ostringstream& os, const BoxStats& bs, double cx, const AxisMap& ym,
              const char* fill) {
    const double half = 14.0;
    os << "<line x1=\"" << coord(cx) << "\" y1=\"" << coord(ym(bs.lo)) << "\" x2=\""
       << coord(cx) << "\" y2=\"" << coord(ym(bs.hi)) << "\" stroke=\"black\"/>\n";
    for (double w : {bs.lo, bs.hi})
        os << "<line x1=\"" << coord(cx - half / 2) << "\" y1=\"" << coord(ym(w))
           << "\" x2=\"" << coord(cx + half / 2) << "\" y2=\"" << coord(ym(w))
           << "\" stroke=\"black\"/>\n";
    os << "<rect x=\"" << coord(cx - half) << "\" y=\"" << coord(ym(bs.q3)) << "\" width=\""
       << coord(2 * half) << "\" height=\"" << coord(ym(bs.q1) - ym(bs.q3)) << "\" fill=\""
       << fill << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << coord(cx - half) << "\" y1=\"" << coord(ym(bs.median))
       << "\" x2=\"" << coord(cx + half) << "\" y2=\"" << coord(ym(bs.median))
       << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
}

std::string svg_boxes(const std::vector<RoiBox>& boxes, int width) {
    double lo = 1e300, hi = -1e300;
    for (const auto& b : boxes) {
        lo = std::min({lo, b.symvf.lo, b.genmvi.lo});
        hi = std::max({hi, b.symvf.hi, b.genmvi.hi});
    }
    if (hi <= lo) hi = lo + 1.0;
    const double pad = 0.08 * (hi - lo);
    AxisMap ym{lo - pad, hi + pad, 345.0, 45.0};

    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
       << "\" height=\"400\" viewBox=\"0 0 " << width << " 400\">\n";
    os << "<line x1=\"40\" y1=\"45\" x2=\"40\" y2=\"345\" stroke=\"black\"/>\n";
    double cx = 90.0;
    for (const auto& b : boxes) {
        draw_box(os, b.symvf, cx, ym, "#d6e4f0");
        draw_box(os, b.genmvi, cx + 36.0, ym, "#f0d6d6");
        os << "<text x=\"" << coord(cx - 10) << "\" y=\"370\" font-size=\"12\">" << b.roi
           << "</text>\n";
        os << "<text x=\"" << coord(cx - 14) << "\" y=\"30\" font-size=\"10\">p="
           << (b.degenerate ? std::string("NA") : coord(b.p)) << "</text>\n";
        cx += 110.0;
    }
    os << "<text x=\"10\" y=\"200\" font-size=\"12\" transform=\"rotate(-90 14 200)\">"
          "pixel-wise r vs MTMVI</text>\n";
    os << "</svg>\n";
    return os.str();
}

std::string csv_roi_stats(const std::vector<RoiStatRow>& rows) {
    std::ostringstream os;
    os << "subject_id,roi_name,region,mean_mtmvi,mean_symvf,mean_genmvi,delta_sy,delta_gen\n";
    for (const auto& r : rows)
        os << r.subject_id << ',' << r.roi_name << ',' << r.region << ','
           << fmt_double(r.mean_mtmvi) << ',' << fmt_double(r.mean_symvf) << ','
           << fmt_double(r.mean_genmvi) << ',' << fmt_double(r.delta_sy) << ','
           << fmt_double(r.delta_gen) << '\n';
    return os.str();
}

std::string csv_scatter(const std::vector<RoiStatRow>& rows) {
    std::ostringstream os;
    os << "subject_id,roi_name,region,mean_mtmvi,mean_symvf,mean_genmvi\n";
    for (const auto& r : rows)
        os << r.subject_id << ',' << r.roi_name << ',' << r.region << ','
           << fmt_double(r.mean_mtmvi) << ',' << fmt_double(r.mean_symvf) << ','
           << fmt_double(r.mean_genmvi) << '\n';
    return os.str();
}

std::string csv_table1(const RoiAnalysis& roi) {
    std::ostringstream os;
    os << "region,metric,median,min,max\n";
    for (const auto& rt : roi.regions) {
        auto line = [&](const char* metric, const MetricSummary& ms) {
            os << rt.region << ',' << metric << ',' << fmt_double(ms.median) << ','
               << fmt_double(ms.min) << ',' << fmt_double(ms.max) << '\n';
        };
        line("MTMVI", rt.mtmvi);
        line("SyMVF", rt.symvf);
        line("GenMVI", rt.genmvi);
        line("delta_sy", rt.delta_sy);
        line("delta_gen", rt.delta_gen);
        os << rt.region << ",p_dsy_vs_dgen,"
           << (rt.p_degenerate ? std::string("NA") : fmt_double(rt.p_delta)) << ",,\n";
    }
    return os.str();
}

std::string csv_pixel(const std::vector<PixelCorrRow>& rows) {
    std::ostringstream os;
    os << "subject_id,roi,n_pixels,r_symvf,r_genmvi\n";
    for (const auto& r : rows)
        os << r.subject_id << ',' << r.roi << ',' << r.n_pixels << ','
           << fmt_double(r.r_symvf) << ',' << fmt_double(r.r_genmvi) << '\n';
    return os.str();
}

std::string csv_boxes(const std::vector<RoiBox>& boxes) {
    std::ostringstream os;
    os << "roi,map,n,median,q1,q3,whisker_lo,whisker_hi,p\n";
    for (const auto& b : boxes) {
        auto line = [&](const char* map, const BoxStats& bs) {
            os << b.roi << ',' << map << ',' << bs.n << ',' << fmt_double(bs.median) << ','
               << fmt_double(bs.q1) << ',' << fmt_double(bs.q3) << ',' << fmt_double(bs.lo)
               << ',' << fmt_double(bs.hi) << ','
               << (b.degenerate ? std::string("NA") : fmt_double(b.p)) << '\n';
        };
        line("SyMVF", b.symvf);
        line("GenMVI", b.genmvi);
    }
    return os.str();
}

} // namespace

std::vector<fs::path> emit_report(const RoiAnalysis& roi, const PixelAnalysis& pixel,
                                  const fs::path& dir) {
    require(!roi.rows.empty(), "emit_report: ROI analysis is empty");
    require(!roi.regions.empty(), "emit_report: region tables are empty");
    require(!pixel.rows.empty(), "emit_report: pixel analysis is empty");
    fs::create_directories(dir);

    std::vector<RoiBox> fig4, fig5;
    for (const auto& b : pixel.boxes)
        (b.roi == "CC" ? fig5 : fig4).push_back(b);
    require(!fig4.empty() && !fig5.empty(), "emit_report: box data incomplete");

    std::vector<fs::path> written;
    auto emit = [&](const char* name, const std::string& content) {
        const fs::path p = dir / name;
        write_file(p, content);
        written.push_back(p);
    };
    emit("roi_stats.csv", csv_roi_stats(roi.rows));
    emit("pixel_corr.csv", csv_pixel(pixel.rows));
    emit("table1.csv", csv_table1(roi));
    emit("scatter_fig3.csv", csv_scatter(roi.rows));
    emit("box_fig4.csv", csv_boxes(fig4));
    emit("box_fig5.csv", csv_boxes(fig5));
    emit("scatter_fig3.svg", svg_scatter(roi));
    emit("box_fig4.svg", svg_boxes(fig4, 560));
    emit("box_fig5.svg", svg_boxes(fig5, 240));
    return written;
}

} // namespace mvi::stats
