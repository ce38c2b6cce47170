// include/trace2lr/svg.hpp

// Copyright 2026  trace2lr authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef TRACE2LR_SVG_HPP
#define TRACE2LR_SVG_HPP

#include <string>
#include <vector>

#include "trace2lr/experiments.hpp"
#include "trace2lr/metrics.hpp"
#include "trace2lr/scorer.hpp"

namespace trace2lr::svg {

/// All rendering is deterministic: fixed layout, fixed number formatting,
/// no randomness. Rendering the same data twice yields identical bytes.
struct PlotStyle {
  int width = 640;
  int height = 480;
  std::string title;
  std::string xlabel;
  std::string ylabel;
};

/// PAV scatter with the y=x reference, Tippett step curves, or ECE curve
/// with its dotted non-informative reference, depending on curve.kind.
std::string render_curve(const CurveData& curve, const PlotStyle& style);

/// Pairwise Cllr / Cllr_min triangles with the per-activity means on the
/// diagonal. Absent cells stay blank.
std::string render_heatmap(const PairwiseMatrixReport& report, const PlotStyle& style);

std::string render_importance(const ImportanceReport& report, const PlotStyle& style);

/// Horizontal bars, one per labeled value (group-combination sweep).
std::string render_bars(const std::vector<std::string>& labels,
                        const std::vector<double>& values, const PlotStyle& style);

/// Per-group likelihood bands over time with truth/prediction strips.
std::string render_timeline(const Timeline& timeline, const PlotStyle& style);

}  // namespace trace2lr::svg

#endif  // TRACE2LR_SVG_HPP
