// include/trace2lr/pav.hpp

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

#ifndef TRACE2LR_PAV_HPP
#define TRACE2LR_PAV_HPP

#include <Eigen/Core>
#include <vector>

namespace trace2lr {

/// One pool of the isotonic fit, expressed on the score-sorted order.
struct PavPool {
  int begin = 0;  // [begin, end) in sorted order
  int end = 0;
  double mean = 0.0;        // pooled target mean
  double target_sum = 0.0;  // sum of targets in the pool
};

struct PavFit {
  std::vector<int> order;      // stable argsort of the scores
  std::vector<PavPool> pools;  // ascending in score and in mean
  Eigen::ArrayXd fitted;       // fitted value per ORIGINAL index

  double fitted_of_sorted(int sorted_pos) const;
};

/// Isotonic (least-squares, nondecreasing) regression of `targets` on
/// `scores` by pool-adjacent-violators. Samples with exactly equal scores
/// are fused into one block up front, since a function of the score cannot
/// separate them.
PavFit pav_fit(const Eigen::ArrayXd& scores, const Eigen::ArrayXd& targets);

}  // namespace trace2lr

#endif  // TRACE2LR_PAV_HPP
