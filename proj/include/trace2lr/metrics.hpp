// include/trace2lr/metrics.hpp

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

#ifndef TRACE2LR_METRICS_HPP
#define TRACE2LR_METRICS_HPP

#include <Eigen/Core>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "trace2lr/common.hpp"
#include "trace2lr/pav.hpp"

namespace trace2lr {

template <typename Scalar>
using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

/// log(1 + exp(x)) without overflow.
template <typename Scalar>
Scalar softplus(Scalar x) {
  if (x > Scalar(36)) return x;
  return std::log1p(std::exp(x));
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

template <typename Scalar>
Scalar logsumexp(const ArrayX<Scalar>& v) {
  const Scalar m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v - m).exp().sum());
}

/// Binary evaluation set: natural-log likelihood ratios with hypothesis
/// labels (1 = H1-true, 0 = H2-true).
struct BinaryEvalSet {
  Eigen::ArrayXd llr;
  Eigen::ArrayXi label;

  Eigen::Index size() const { return llr.size(); }
  int count(int lab) const { return static_cast<int>((label == lab).count()); }
};

/// Multiclass evaluation set: T x K natural-log likelihoods and class
/// indices in [0, K).
struct MulticlassEvalSet {
  Eigen::MatrixXd loglik;
  Eigen::ArrayXi label;
};

/// Cllr and its discrimination/calibration decomposition.
struct CllrReport {
  double cllr = 0.0;
  double cllr_min = 0.0;
  double cllr_cal = 0.0;
};

enum class CurveKind { pav, tippett, ece };

struct CurveSeries {
  std::string name;
  std::vector<std::array<double, 2>> points;
};

/// Rendering-ready curve points. Axis units of LR-valued quantities are
/// log10; metric computations stay in natural log internally.
struct CurveData {
  CurveKind kind = CurveKind::pav;
  std::vector<CurveSeries> series;

  const CurveSeries* find(const std::string& name) const {
    for (const auto& s : series)
      if (s.name == name) return &s;
    return nullptr;
  }
};

/// Log-likelihood-ratio cost. 0 = perfect, 1 = uninformative.
template <typename Scalar>
Scalar binary_cllr(const ArrayX<Scalar>& llr, const Eigen::ArrayXi& label) {
  if (llr.size() != label.size()) throw ValidationError("cllr: size mismatch");
  const Scalar ln2 = std::log(Scalar(2));
  Scalar s1 = 0, s2 = 0;
  Eigen::Index n1 = 0, n2 = 0;
  for (Eigen::Index i = 0; i < llr.size(); ++i) {
    if (label[i] == 1) {
      s1 += softplus(-llr[i]);
      ++n1;
    } else {
      s2 += softplus(llr[i]);
      ++n2;
    }
  }
  if (n1 == 0 || n2 == 0) throw ValidationError("cllr: both hypotheses must be present");
  return s1 / (Scalar(2) * static_cast<Scalar>(n1) * ln2) +
         s2 / (Scalar(2) * static_cast<Scalar>(n2) * ln2);
}

inline double cllr(const BinaryEvalSet& set) { return binary_cllr<double>(set.llr, set.label); }

/// PAV-optimal llrs for the set, aligned with the input order. Scores must
/// order the samples the same way the llrs do (any monotone link). Pools
/// whose posterior is exactly 0 or 1 are Laplace-smoothed to keep the
/// returned llrs finite.
Eigen::ArrayXd pav_llrs(const BinaryEvalSet& set, const Eigen::ArrayXd& scores);

/// Cllr of the PAV-recalibrated set (discrimination loss). Computed from the
/// exact pooled posteriors, where boundary pools contribute zero loss.
double pav_cllr_min(const BinaryEvalSet& set, const Eigen::ArrayXd& scores);

CllrReport cllr_decompose(const BinaryEvalSet& set, const Eigen::ArrayXd& scores);

/// Multiclass cross-entropy cost and its log2(K)-normalized variant.
struct CmxeResult {
  double cmxe = 0.0;
  double normalized = 0.0;
};

template <typename Scalar>
CmxeResult multiclass_cmxe(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& loglik,
                           const Eigen::ArrayXi& label) {
  const Eigen::Index t_count = loglik.rows();
  const Eigen::Index k_count = loglik.cols();
  if (label.size() != t_count) throw ValidationError("cmxe: size mismatch");
  if (k_count < 2) throw ValidationError("cmxe: need at least two classes");
  const Scalar ln2 = std::log(Scalar(2));
  ArrayX<Scalar> class_sum = ArrayX<Scalar>::Zero(k_count);
  Eigen::ArrayXi class_n = Eigen::ArrayXi::Zero(k_count);
  for (Eigen::Index t = 0; t < t_count; ++t) {
    const int k = label[t];
    if (k < 0 || k >= k_count) throw ValidationError("cmxe: label out of range");
    ArrayX<Scalar> row = loglik.row(t).transpose().array();
    class_sum[k] += (logsumexp(row) - row[k]) / ln2;
    ++class_n[k];
  }
  Scalar total = 0;
  for (Eigen::Index k = 0; k < k_count; ++k) {
    if (class_n[k] == 0)
      throw ValidationError("cmxe: class " + std::to_string(k) + " has no samples");
    total += class_sum[k] / static_cast<Scalar>(class_n[k]);
  }
  CmxeResult r;
  r.cmxe = static_cast<double>(total / static_cast<Scalar>(k_count));
  r.normalized = r.cmxe / std::log2(static_cast<double>(k_count));
  return r;
}

inline CmxeResult cmxe(const MulticlassEvalSet& set) {
  return multiclass_cmxe<double>(set.loglik, set.label);
}

/// Inverse cumulative distributions of the llrs per hypothesis; x in log10.
CurveData tippett_curve(const BinaryEvalSet& set);

/// Empirical cross entropy over a grid of log10 prior odds, with the
/// non-informative (llr = 0) reference as a second series.
CurveData ece_curve(const BinaryEvalSet& set, const Eigen::ArrayXd& prior_log10odds_grid);
Eigen::ArrayXd default_ece_grid();  // 61 points over [-3, 3]

/// System-vs-PAV llr scatter (both in log10) with the y=x reference.
CurveData pav_curve(const BinaryEvalSet& set, const Eigen::ArrayXd& scores);

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels);

}  // namespace trace2lr

#endif  // TRACE2LR_METRICS_HPP
