// src/metrics.cpp

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

#include "trace2lr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace trace2lr {

namespace {

constexpr double kLn10 = 2.302585092994045684;

void check_two_sided(const BinaryEvalSet& set) {
  if (set.llr.size() == 0) throw ValidationError("empty evaluation set");
  if (set.count(1) == 0 || set.count(0) == 0)
    throw ValidationError("evaluation set must contain both hypotheses");
}

}  // namespace

Eigen::ArrayXd pav_llrs(const BinaryEvalSet& set, const Eigen::ArrayXd& scores) {
  check_two_sided(set);
  if (scores.size() != set.llr.size()) throw ValidationError("pav_llrs: size mismatch");
  const PavFit fit = pav_fit(scores, set.label.cast<double>());
  const double log_prior = std::log(static_cast<double>(set.count(1))) -
                           std::log(static_cast<double>(set.count(0)));
  Eigen::ArrayXd out(scores.size());
  for (const auto& pool : fit.pools) {
    const double n = static_cast<double>(pool.end - pool.begin);
    double p = pool.mean;
    if (p <= 0.0 || p >= 1.0) p = (pool.target_sum + 0.5) / (n + 1.0);  // Laplace
    const double llr = std::log(p) - std::log1p(-p) - log_prior;
    for (int k = pool.begin; k < pool.end; ++k)
      out[fit.order[static_cast<std::size_t>(k)]] = llr;
  }
  return out;
}

double pav_cllr_min(const BinaryEvalSet& set, const Eigen::ArrayXd& scores) {
  check_two_sided(set);
  if (scores.size() != set.llr.size()) throw ValidationError("pav_cllr_min: size mismatch");
  const PavFit fit = pav_fit(scores, set.label.cast<double>());
  const double n1 = static_cast<double>(set.count(1));
  const double n2 = static_cast<double>(set.count(0));
  const double prior_odds = n1 / n2;
  const double ln2 = std::log(2.0);
  double s1 = 0.0, s2 = 0.0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    const double p = fit.fitted[i];
    if (set.label[i] == 1) {
      // p > 0 is guaranteed: the pool contains this H1 sample.
      if (p < 1.0) s1 += std::log1p((1.0 - p) / p * prior_odds);
    } else {
      if (p > 0.0) s2 += std::log1p(p / (1.0 - p) / prior_odds);
    }
  }
  return s1 / (2.0 * n1 * ln2) + s2 / (2.0 * n2 * ln2);
}

CllrReport cllr_decompose(const BinaryEvalSet& set, const Eigen::ArrayXd& scores) {
  CllrReport r;
  r.cllr = cllr(set);
  r.cllr_min = pav_cllr_min(set, scores);
  r.cllr_cal = r.cllr - r.cllr_min;
  if (r.cllr_cal < 0.0 && r.cllr_cal > -1e-12) r.cllr_cal = 0.0;
  return r;
}

CurveData tippett_curve(const BinaryEvalSet& set) {
  if (set.llr.size() == 0) throw ValidationError("tippett_curve: empty set");
  std::set<double> xs;
  for (Eigen::Index i = 0; i < set.llr.size(); ++i) xs.insert(set.llr[i] / kLn10);
  const double lo = *xs.begin(), hi = *xs.rbegin();
  const double pad = (hi > lo ? hi - lo : 1.0) * 0.01;
  std::vector<double> grid(xs.begin(), xs.end());
  grid.insert(grid.begin(), lo - pad);
  grid.push_back(hi + pad);

  CurveData curve;
  curve.kind = CurveKind::tippett;
  for (int lab : {1, 0}) {
    CurveSeries s;
    s.name = lab == 1 ? "h1" : "h2";
    double total = 0;
    for (Eigen::Index i = 0; i < set.label.size(); ++i) total += set.label[i] == lab ? 1.0 : 0.0;
    if (total == 0) continue;
    for (double x : grid) {
      double cnt = 0;
      for (Eigen::Index i = 0; i < set.llr.size(); ++i)
        if (set.label[i] == lab && set.llr[i] / kLn10 >= x) cnt += 1.0;
      s.points.push_back({x, cnt / total});
    }
    curve.series.push_back(std::move(s));
  }
  return curve;
}

Eigen::ArrayXd default_ece_grid() { return Eigen::ArrayXd::LinSpaced(61, -3.0, 3.0); }

CurveData ece_curve(const BinaryEvalSet& set, const Eigen::ArrayXd& grid) {
  check_two_sided(set);
  const double ln2 = std::log(2.0);
  const double n1 = static_cast<double>(set.count(1));
  const double n2 = static_cast<double>(set.count(0));
  CurveSeries ece, ref;
  ece.name = "ece";
  ref.name = "reference";
  for (Eigen::Index g = 0; g < grid.size(); ++g) {
    const double pi = grid[g] * kLn10;  // natural-log prior odds
    const double p1 = sigmoid(pi);
    double s1 = 0.0, s2 = 0.0;
    for (Eigen::Index i = 0; i < set.llr.size(); ++i) {
      if (set.label[i] == 1)
        s1 += softplus(-set.llr[i] - pi);
      else
        s2 += softplus(set.llr[i] + pi);
    }
    const double value = p1 * s1 / (n1 * ln2) + (1.0 - p1) * s2 / (n2 * ln2);
    const double reference = p1 * softplus(-pi) / ln2 + (1.0 - p1) * softplus(pi) / ln2;
    ece.points.push_back({grid[g], value});
    ref.points.push_back({grid[g], reference});
  }
  CurveData curve;
  curve.kind = CurveKind::ece;
  curve.series = {std::move(ece), std::move(ref)};
  return curve;
}

CurveData pav_curve(const BinaryEvalSet& set, const Eigen::ArrayXd& scores) {
  const Eigen::ArrayXd optimal = pav_llrs(set, scores);
  CurveSeries pts;
  pts.name = "points";
  std::vector<int> order(static_cast<std::size_t>(set.llr.size()));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return set.llr[a] < set.llr[b]; });
  for (int i : order) pts.points.push_back({set.llr[i] / kLn10, optimal[i] / kLn10});

  double lo = pts.points.front()[0], hi = pts.points.back()[0];
  for (const auto& p : pts.points) {
    lo = std::min(lo, p[1]);
    hi = std::max(hi, p[1]);
  }
  CurveSeries ref;
  ref.name = "reference";
  ref.points = {{lo, lo}, {hi, hi}};

  CurveData curve;
  curve.kind = CurveKind::pav;
  curve.series = {std::move(pts), std::move(ref)};
  return curve;
}

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
  if (predictions.size() != labels.size()) throw ValidationError("accuracy: size mismatch");
  if (predictions.empty()) throw ValidationError("accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    if (predictions[i] == labels[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

}  // namespace trace2lr
