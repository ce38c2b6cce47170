// src/pav.cpp

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

#include "trace2lr/pav.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace trace2lr {

double PavFit::fitted_of_sorted(int sorted_pos) const {
  for (const auto& p : pools)
    if (sorted_pos >= p.begin && sorted_pos < p.end) return p.mean;
  throw std::out_of_range("PavFit::fitted_of_sorted");
}

PavFit pav_fit(const Eigen::ArrayXd& scores, const Eigen::ArrayXd& targets) {
  const int n = static_cast<int>(scores.size());
  if (targets.size() != n) throw std::invalid_argument("pav_fit: size mismatch");
  PavFit fit;
  fit.order.resize(static_cast<std::size_t>(n));
  std::iota(fit.order.begin(), fit.order.end(), 0);
  std::stable_sort(fit.order.begin(), fit.order.end(),
                   [&](int a, int b) { return scores[a] < scores[b]; });

  // Blocks of equal score, then PAV merging on a stack.
  std::vector<PavPool> stack;
  int i = 0;
  while (i < n) {
    int j = i;
    double tsum = 0.0;
    while (j < n && scores[fit.order[static_cast<std::size_t>(j)]] ==
                        scores[fit.order[static_cast<std::size_t>(i)]]) {
      tsum += targets[fit.order[static_cast<std::size_t>(j)]];
      ++j;
    }
    PavPool blk{i, j, tsum / static_cast<double>(j - i), tsum};
    while (!stack.empty() && stack.back().mean >= blk.mean) {
      const PavPool& top = stack.back();
      blk.begin = top.begin;
      blk.target_sum += top.target_sum;
      blk.mean = blk.target_sum / static_cast<double>(blk.end - blk.begin);
      stack.pop_back();
    }
    stack.push_back(blk);
    i = j;
  }

  fit.pools = std::move(stack);
  fit.fitted.resize(n);
  for (const auto& p : fit.pools)
    for (int k = p.begin; k < p.end; ++k) fit.fitted[fit.order[static_cast<std::size_t>(k)]] = p.mean;
  return fit;
}

}  // namespace trace2lr
