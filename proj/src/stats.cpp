// src/stats.cpp

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

#include "trace2lr/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

namespace trace2lr {

WilcoxonResult wilcoxon_signed_rank_greater(const std::vector<double>& differences) {
  std::vector<double> d;
  for (double v : differences)
    if (v != 0.0) d.push_back(v);
  WilcoxonResult res;
  res.n_effective = static_cast<int>(d.size());
  if (d.empty()) {
    res.p_value = 1.0;
    res.exact = true;
    return res;
  }

  const std::size_t n = d.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return std::abs(d[a]) < std::abs(d[b]); });

  // Average ranks over ties in |d|; doubled ranks stay integral.
  std::vector<double> rank(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && std::abs(d[order[j]]) == std::abs(d[order[i]])) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) rank[order[k]] = avg;
    i = j;
  }

  double w_plus = 0.0;
  for (std::size_t k = 0; k < n; ++k)
    if (d[k] > 0) w_plus += rank[k];
  res.statistic = w_plus;

  if (n <= 25) {
    // Exact: distribution of the doubled rank sum over all sign assignments,
    // by subset-sum counting.
    std::vector<long long> rank2(n);
    long long total2 = 0;
    for (std::size_t k = 0; k < n; ++k) {
      rank2[k] = static_cast<long long>(std::llround(rank[k] * 2.0));
      total2 += rank2[k];
    }
    std::vector<double> count(static_cast<std::size_t>(total2) + 1, 0.0);
    count[0] = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
      for (long long s = total2; s >= rank2[k]; --s)
        count[static_cast<std::size_t>(s)] += count[static_cast<std::size_t>(s - rank2[k])];
    }
    const long long w2 = static_cast<long long>(std::llround(w_plus * 2.0));
    double tail = 0.0, all = 0.0;
    for (long long s = 0; s <= total2; ++s) {
      all += count[static_cast<std::size_t>(s)];
      if (s >= w2) tail += count[static_cast<std::size_t>(s)];
    }
    res.p_value = tail / all;
    res.exact = true;
  } else {
    const double nn = static_cast<double>(n);
    const double mu = nn * (nn + 1.0) / 4.0;
    double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0;
    // Tie correction: subtract sum(t^3 - t)/48 per tie group.
    i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j < n && std::abs(d[order[j]]) == std::abs(d[order[i]])) ++j;
      const double t = static_cast<double>(j - i);
      var -= (t * t * t - t) / 48.0;
      i = j;
    }
    const double z = (w_plus - mu - 0.5) / std::sqrt(var);
    res.p_value = 0.5 * std::erfc(z / std::sqrt(2.0));
    res.exact = false;
  }
  return res;
}

}  // namespace trace2lr
