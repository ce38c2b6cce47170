// include/trace2lr/calibration.hpp

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

#ifndef TRACE2LR_CALIBRATION_HPP
#define TRACE2LR_CALIBRATION_HPP

#include <Eigen/Core>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "trace2lr/scorer.hpp"

namespace trace2lr {

enum class CalibratorKind { logistic, gaussian, kde };

const char* to_string(CalibratorKind k);
CalibratorKind calibrator_kind_from_string(const std::string& s);

/// Sigmoid calibration map c(s; w, m) = 1 / (1 + exp(-w (s - m))).
/// Fitted slopes are constrained nonnegative and capped at |w| <= 50.
struct LogisticCalibrator {
  double w = 1.0;
  double m = 0.0;

  double posterior(double s) const;
};

/// Per-hypothesis score Gaussians; posterior via the density ratio with
/// training priors.
struct GaussianCalibrator {
  double mu1 = 0.0, sigma1 = 1.0;
  double mu2 = 0.0, sigma2 = 1.0;
  double pi1 = 0.5, pi2 = 0.5;

  double posterior(double s) const;
};

/// Gaussian-kernel densities over the stored training scores, Silverman
/// bandwidths. Evaluated in log space so far tails stay well-defined.
struct KdeCalibrator {
  Eigen::ArrayXd scores1, scores2;
  double bandwidth1 = 1.0, bandwidth2 = 1.0;
  double pi1 = 0.5, pi2 = 0.5;

  double posterior(double s) const;
};

using Calibrator = std::variant<LogisticCalibrator, GaussianCalibrator, KdeCalibrator>;

double calibrator_posterior(const Calibrator& c, double score);
CalibratorKind calibrator_kind(const Calibrator& c);

/// Weighted maximum-likelihood logistic fit by damped Newton iterations
/// (L2 penalty 1e-6, slope constrained to [0, 50], gradient tolerance 1e-8,
/// at most 1000 iterations). `labels`: 1 = H1, 0 = H2.
LogisticCalibrator fit_logistic(const Eigen::ArrayXd& scores, const Eigen::ArrayXi& labels,
                                const Eigen::ArrayXd& weights = {});

GaussianCalibrator fit_gaussian(const Eigen::ArrayXd& scores, const Eigen::ArrayXi& labels);
KdeCalibrator fit_kde(const Eigen::ArrayXd& scores, const Eigen::ArrayXi& labels);

Calibrator fit_calibrator(CalibratorKind kind, const Eigen::ArrayXd& scores,
                          const Eigen::ArrayXi& labels, const Eigen::ArrayXd& weights = {});

/// Prior odds n1/n2 from training counts.
struct PriorOdds {
  double value = 1.0;
  std::size_t n1 = 1, n2 = 1;
};

PriorOdds prior_odds_from_counts(std::size_t n1, std::size_t n2);

/// posterior odds / prior odds; p clamped to [1e-9, 1 - 1e-9] first.
double posterior_to_lr(double p, const PriorOdds& prior);

/// Empirical lower/upper bounds on log10 LR: data range capped by the
/// sample-size rule log10(n+1). This is a conservative surrogate for the
/// full ELUB construction and is labeled as such in serialized output.
struct ElubBounds {
  double lower_log10 = 0.0;
  double upper_log10 = 0.0;
};

ElubBounds compute_elub(const Eigen::ArrayXd& training_scores, const Eigen::ArrayXi& labels,
                        const Calibrator& calibrator, const PriorOdds& prior);

/// Clamp in log10 domain; nondecreasing in lr.
double apply_bounds(double lr, const ElubBounds& bounds);

/// Scorer + calibrator + prior odds + ELUB bounds. Hypotheses are label
/// sets; for activity pairs they are singletons.
struct LrSystem {
  TreeEnsembleModel model;
  Calibrator calibrator;
  PriorOdds prior_odds;
  ElubBounds bounds;
  std::vector<std::string> h1_labels, h2_labels;

  /// Binary margin fed to the calibrator: score[H1] - score[H2].
  double raw_score(const MinuteSample& sample) const;
  double evaluate_lr(const MinuteSample& sample) const;     // bounded, linear scale
  double evaluate_log10_lr(const MinuteSample& sample) const;

  nlohmann::json to_json() const;
  static LrSystem from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static LrSystem load(const std::string& path);
};

/// Trains the scorer on H1-vs-H2 relabeled samples, scores the training set,
/// fits the calibrator on those scores and derives prior odds and bounds
/// from them. `weight_calibration` reuses the scorer's class weights in the
/// calibrator fit (off by default).
LrSystem fit_lr_system(const LabeledDataset& train, const std::vector<std::string>& h1_labels,
                       const std::vector<std::string>& h2_labels, const ScorerConfig& config,
                       CalibratorKind calibrator, bool weight_calibration = false);

/// Softmax of the raw per-class scores: positive, sums to one, ordered by
/// the model's class order.
Eigen::ArrayXd multiclass_likelihoods(const TreeEnsembleModel& model, const MinuteSample& sample);
Eigen::ArrayXd multiclass_likelihoods_from_scores(const Eigen::ArrayXd& raw_scores);

}  // namespace trace2lr

#endif  // TRACE2LR_CALIBRATION_HPP
