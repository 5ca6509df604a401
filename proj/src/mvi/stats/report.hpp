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

#include "mvi/stats/stats.hpp"

#include <filesystem>

namespace mvi::stats {

// CSV schemas (headers are fixed; see README):
//   roi_stats.csv    subject_id,roi_name,region,mean_mtmvi,mean_symvf,
//                    mean_genmvi,delta_sy,delta_gen
//   pixel_corr.csv   subject_id,roi,n_pixels,r_symvf,r_genmvi
//   table1.csv       region,metric,median,min,max
//   scatter_fig3.csv subject_id,roi_name,region,mean_mtmvi,mean_symvf,
//                    mean_genmvi
//   box_fig4.csv     roi,map,n,median,q1,q3,whisker_lo,whisker_hi,p
//   box_fig5.csv     same schema, corpus-callosum ROI only
// SVG plots (scatter_fig3.svg, box_fig4.svg, box_fig5.svg) sit alongside.
// Output bytes are a pure function of the analysis inputs.

std::vector<std::filesystem::path> emit_report(const RoiAnalysis& roi,
                                               const PixelAnalysis& pixel,
                                               const std::filesystem::path& dir);

} // namespace mvi::stats
