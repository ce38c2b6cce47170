// include/trace2lr/stats.hpp

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

#ifndef TRACE2LR_STATS_HPP
#define TRACE2LR_STATS_HPP

#include <vector>

namespace trace2lr {

struct WilcoxonResult {
  double statistic = 0.0;  // W+: rank sum of positive differences
  double p_value = 1.0;    // one-sided, alternative "greater"
  int n_effective = 0;     // pairs left after dropping zero differences
  bool exact = false;      // exact distribution (n <= 25) vs normal approx
};

/// One-sided Wilcoxon signed-rank test of "differences tend to be positive".
/// Zero differences are dropped (Wilcoxon's convention); ties in |d| get
/// average ranks. Exact rank-sum distribution (equivalent to enumerating all
/// 2^n sign assignments) for n <= 25, otherwise a normal approximation with
/// tie-corrected variance and continuity correction.
WilcoxonResult wilcoxon_signed_rank_greater(const std::vector<double>& differences);

}  // namespace trace2lr

#endif  // TRACE2LR_STATS_HPP
