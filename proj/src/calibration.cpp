// src/calibration.cpp

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

#include "trace2lr/calibration.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "trace2lr/common.hpp"
#include "trace2lr/metrics.hpp"

namespace trace2lr {

namespace {

constexpr double kSlopeCap = 50.0;
constexpr double kSlopeFloor = 1e-6;
constexpr double kL2Penalty = 1e-6;
constexpr double kGradTol = 1e-8;
constexpr int kMaxNewtonIters = 1000;
constexpr double kPosteriorClamp = 1e-9;
constexpr double kLn10 = 2.302585092994045684;

void check_binary_labels(const Eigen::ArrayXd& scores, const Eigen::ArrayXi& labels) {
  if (scores.size() != labels.size()) throw ValidationError("calibrator: size mismatch");
  if (scores.size() == 0) throw ValidationError("calibrator: empty input");
  if (!scores.isFinite().all()) throw ValidationError("calibrator: non-finite score");
  const int n1 = static_cast<int>((labels == 1).count());
  const int n2 = static_cast<int>((labels == 0).count());
  if (n1 + n2 != static_cast<int>(labels.size()))
    throw ValidationError("calibrator: labels must be 0 (H2) or 1 (H1)");
  if (n1 == 0 || n2 == 0) throw ValidationError("calibrator: both hypotheses must be present");
}

/// Weighted penalized NLL of p = sigmoid(a s + b).
double logistic_nll(const Eigen::ArrayXd& s, const Eigen::ArrayXi& y, const Eigen::ArrayXd& w,
                    double a, double b) {
  double nll = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double z = a * s[i] + b;
    // -log p for y=1 is softplus(-z); -log(1-p) is softplus(z).
    nll += w[i] * softplus(y[i] == 1 ? -z : z);
  }
  return nll + 0.5 * kL2Penalty * (a * a + b * b);
}

/// One-dimensional Newton for the intercept with the slope held fixed.
double refit_intercept(const Eigen::ArrayXd& s, const Eigen::ArrayXi& y,
                       const Eigen::ArrayXd& w, double a, double b0) {
  double b = b0;
  for (int it = 0; it < 200; ++it) {
    double g = kL2Penalty * b, h = kL2Penalty;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      const double p = sigmoid(a * s[i] + b);
      g += w[i] * (p - (y[i] == 1 ? 1.0 : 0.0));
      h += std::max(w[i] * p * (1.0 - p), 1e-12);
    }
    if (std::abs(g) < kGradTol) break;
    double step = -g / h;
    double nll = logistic_nll(s, y, w, a, b);
    for (int half = 0; half < 50; ++half) {
      if (logistic_nll(s, y, w, a, b + step) <= nll) break;
      step *= 0.5;
    }
    b += step;
  }
  return b;
}

double unbiased_sd(const Eigen::ArrayXd& v) {
  const double mean = v.mean();
  return std::sqrt((v - mean).square().sum() / static_cast<double>(v.size() - 1));
}

/// log N(x; mu, sigma)
double log_normal_pdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return -0.5 * z * z - std::log(sigma) - 0.9189385332046727;  // log sqrt(2 pi)
}

double log_kde(double x, const Eigen::ArrayXd& scores, double bandwidth) {
  const Eigen::ArrayXd z = (scores - x) / bandwidth;
  const Eigen::ArrayXd logk = -0.5 * z.square();
  const double m = logk.maxCoeff();
  return m + std::log((logk - m).exp().sum()) - std::log(static_cast<double>(scores.size())) -
         std::log(bandwidth) - 0.9189385332046727;
}

}  // namespace

const char* to_string(CalibratorKind k) {
  switch (k) {
    case CalibratorKind::logistic:
      return "logistic";
    case CalibratorKind::gaussian:
      return "gaussian";
    case CalibratorKind::kde:
      return "kde";
  }
  return "unknown";
}

CalibratorKind calibrator_kind_from_string(const std::string& s) {
  if (s == "logistic" || s == "logreg") return CalibratorKind::logistic;
  if (s == "gaussian" || s == "gauss") return CalibratorKind::gaussian;
  if (s == "kde") return CalibratorKind::kde;
  throw ValidationError("unknown calibrator kind '" + s + "'");
}

double LogisticCalibrator::posterior(double s) const {
  // w (s - m) computed as w s + b to stay finite for tiny slopes.
  return sigmoid(w * s - w * m);
}

double GaussianCalibrator::posterior(double s) const {
  const double l1 = log_normal_pdf(s, mu1, sigma1) + std::log(pi1);
  const double l2 = log_normal_pdf(s, mu2, sigma2) + std::log(pi2);
  return sigmoid(l1 - l2);
}

double KdeCalibrator::posterior(double s) const {
  const double l1 = log_kde(s, scores1, bandwidth1) + std::log(pi1);
  const double l2 = log_kde(s, scores2, bandwidth2) + std::log(pi2);
  return sigmoid(l1 - l2);
}

double calibrator_posterior(const Calibrator& c, double score) {
  return std::visit([&](const auto& cal) { return cal.posterior(score); }, c);
}

CalibratorKind calibrator_kind(const Calibrator& c) {
  if (std::holds_alternative<LogisticCalibrator>(c)) return CalibratorKind::logistic;
  if (std::holds_alternative<GaussianCalibrator>(c)) return CalibratorKind::gaussian;
  return CalibratorKind::kde;
}

LogisticCalibrator fit_logistic(const Eigen::ArrayXd& scores, const Eigen::ArrayXi& labels,
                                const Eigen::ArrayXd& weights) {
  check_binary_labels(scores, labels);
  Eigen::ArrayXd w = weights.size() ? weights : Eigen::ArrayXd::Ones(scores.size());
  if (w.size() != scores.size()) throw ValidationError("fit_logistic: weight size mismatch");
  if ((w <= 0).any()) throw ValidationError("fit_logistic: weights must be positive");

  double a = 0.0, b = 0.0;
  for (int it = 0; it < kMaxNewtonIters; ++it) {
    double g0 = kL2Penalty * a, g1 = kL2Penalty * b;
    double h00 = kL2Penalty, h01 = 0.0, h11 = kL2Penalty;
    for (Eigen::Index i = 0; i < scores.size(); ++i) {
      const double p = sigmoid(a * scores[i] + b);
      const double r = w[i] * (p - (labels[i] == 1 ? 1.0 : 0.0));
      const double q = std::max(w[i] * p * (1.0 - p), 1e-12);
      g0 += r * scores[i];
      g1 += r;
      h00 += q * scores[i] * scores[i];
      h01 += q * scores[i];
      h11 += q;
    }
    if (std::max(std::abs(g0), std::abs(g1)) < kGradTol) break;
    Eigen::Matrix2d hess;
    hess << h00, h01, h01, h11;
    Eigen::Vector2d grad(g0, g1);
    Eigen::Vector2d step = -hess.ldlt().solve(grad);
    const double nll = logistic_nll(scores, labels, w, a, b);
    double scale = 1.0;
    for (int half = 0; half < 50; ++half) {
      if (logistic_nll(scores, labels, w, a + scale * step[0], b + scale * step[1]) <= nll)
        break;
      scale *= 0.5;
    }
    a += scale * step[0];
    b += scale * step[1];
    if (a > kSlopeCap * 2) a = kSlopeCap * 2;  // keep exp() in range while iterating
    if (a < -kSlopeCap * 2) a = -kSlopeCap * 2;
  }

  // Higher score must not lower the H1 posterior; under perfect separation
  // the cap takes over. Re-optimize the intercept on the boundary.
  if (a < kSlopeFloor || a > kSlopeCap) {
    a = std::clamp(a, kSlopeFloor, kSlopeCap);
    b = refit_intercept(scores, labels, w, a, b);
  }
  LogisticCalibrator cal;
  cal.w = a;
  cal.m = -b / a;
  return cal;
}

GaussianCalibrator fit_gaussian(const Eigen::ArrayXd& scores, const Eigen::ArrayXi& labels) {
  check_binary_labels(scores, labels);
  std::vector<double> s1, s2;
  for (Eigen::Index i = 0; i < scores.size(); ++i)
    (labels[i] == 1 ? s1 : s2).push_back(scores[i]);
  if (s1.size() < 2 || s2.size() < 2)
    throw ValidationError("fit_gaussian: need at least two samples per hypothesis");
  GaussianCalibrator cal;
  Eigen::ArrayXd a1 = Eigen::Map<Eigen::ArrayXd>(s1.data(), static_cast<Eigen::Index>(s1.size()));
  Eigen::ArrayXd a2 = Eigen::Map<Eigen::ArrayXd>(s2.data(), static_cast<Eigen::Index>(s2.size()));
  cal.mu1 = a1.mean();
  cal.mu2 = a2.mean();
  cal.sigma1 = unbiased_sd(a1);
  cal.sigma2 = unbiased_sd(a2);
  if (cal.sigma1 <= 0.0 || cal.sigma2 <= 0.0)
    throw ValidationError(
        "fit_gaussian: zero score variance in a hypothesis; use the logistic calibrator");
  cal.pi1 = static_cast<double>(s1.size()) / static_cast<double>(scores.size());
  cal.pi2 = 1.0 - cal.pi1;
  return cal;
}

KdeCalibrator fit_kde(const Eigen::ArrayXd& scores, const Eigen::ArrayXi& labels) {
  check_binary_labels(scores, labels);
  std::vector<double> s1, s2;
  for (Eigen::Index i = 0; i < scores.size(); ++i)
    (labels[i] == 1 ? s1 : s2).push_back(scores[i]);
  if (s1.size() < 2 || s2.size() < 2)
    throw ValidationError("fit_kde: need at least two samples per hypothesis");
  KdeCalibrator cal;
  cal.scores1 = Eigen::Map<Eigen::ArrayXd>(s1.data(), static_cast<Eigen::Index>(s1.size()));
  cal.scores2 = Eigen::Map<Eigen::ArrayXd>(s2.data(), static_cast<Eigen::Index>(s2.size()));
  const double sd1 = unbiased_sd(cal.scores1);
  const double sd2 = unbiased_sd(cal.scores2);
  if (sd1 <= 0.0 || sd2 <= 0.0)
    throw ValidationError(
        "fit_kde: zero score variance in a hypothesis; use the logistic calibrator");
  // Silverman's rule per hypothesis.
  cal.bandwidth1 = 1.06 * sd1 * std::pow(static_cast<double>(s1.size()), -0.2);
  cal.bandwidth2 = 1.06 * sd2 * std::pow(static_cast<double>(s2.size()), -0.2);
  cal.pi1 = static_cast<double>(s1.size()) / static_cast<double>(scores.size());
  cal.pi2 = 1.0 - cal.pi1;
  return cal;
}

Calibrator fit_calibrator(CalibratorKind kind, const Eigen::ArrayXd& scores,
                          const Eigen::ArrayXi& labels, const Eigen::ArrayXd& weights) {
  switch (kind) {
    case CalibratorKind::logistic:
      return fit_logistic(scores, labels, weights);
    case CalibratorKind::gaussian:
      return fit_gaussian(scores, labels);
    case CalibratorKind::kde:
      return fit_kde(scores, labels);
  }
  throw ValidationError("unknown calibrator kind");
}

PriorOdds prior_odds_from_counts(std::size_t n1, std::size_t n2) {
  if (n1 == 0 || n2 == 0)
    throw ValidationError("prior odds require at least one sample per hypothesis");
  PriorOdds p;
  p.n1 = n1;
  p.n2 = n2;
  p.value = static_cast<double>(n1) / static_cast<double>(n2);
  return p;
}

double posterior_to_lr(double p, const PriorOdds& prior) {
  const double q = std::clamp(p, kPosteriorClamp, 1.0 - kPosteriorClamp);
  return q / (1.0 - q) / prior.value;
}

ElubBounds compute_elub(const Eigen::ArrayXd& training_scores, const Eigen::ArrayXi& labels,
                        const Calibrator& calibrator, const PriorOdds& prior) {
  check_binary_labels(training_scores, labels);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < training_scores.size(); ++i) {
    const double lr = posterior_to_lr(calibrator_posterior(calibrator, training_scores[i]), prior);
    const double l10 = std::log10(lr);
    lo = std::min(lo, l10);
    hi = std::max(hi, l10);
  }
  ElubBounds b;
  b.upper_log10 = std::min(hi, std::log10(static_cast<double>(prior.n2) + 1.0));
  b.lower_log10 = std::max(lo, -std::log10(static_cast<double>(prior.n1) + 1.0));
  // Keep LR = 1 reachable even when all training LRs fall on one side.
  b.lower_log10 = std::min(b.lower_log10, 0.0);
  b.upper_log10 = std::max(b.upper_log10, 0.0);
  return b;
}

double apply_bounds(double lr, const ElubBounds& bounds) {
  if (!(lr > 0)) throw ValidationError("apply_bounds: LR must be positive");
  return std::pow(10.0, std::clamp(std::log10(lr), bounds.lower_log10, bounds.upper_log10));
}

double LrSystem::raw_score(const MinuteSample& sample) const {
  const Eigen::ArrayXd s = model.score(sample);
  return s[0] - s[1];
}

double LrSystem::evaluate_lr(const MinuteSample& sample) const {
  const double p = calibrator_posterior(calibrator, raw_score(sample));
  return apply_bounds(posterior_to_lr(p, prior_odds), bounds);
}

double LrSystem::evaluate_log10_lr(const MinuteSample& sample) const {
  return std::log10(evaluate_lr(sample));
}

namespace {

/// Composite class name for a hypothesis made of several activity labels.
std::string hypothesis_name(const std::vector<std::string>& labels) {
  std::string name;
  for (const auto& l : labels) {
    if (!name.empty()) name += "+";
    name += l;
  }
  return name;
}

}  // namespace

LrSystem fit_lr_system(const LabeledDataset& train, const std::vector<std::string>& h1_labels,
                       const std::vector<std::string>& h2_labels, const ScorerConfig& config,
                       CalibratorKind calibrator, bool weight_calibration) {
  if (h1_labels.empty() || h2_labels.empty())
    throw ValidationError("fit_lr_system: empty hypothesis label set");
  std::set<std::string> h1(h1_labels.begin(), h1_labels.end());
  std::set<std::string> h2(h2_labels.begin(), h2_labels.end());
  for (const auto& l : h1)
    if (h2.count(l)) throw ValidationError("fit_lr_system: hypotheses share label '" + l + "'");

  const std::string name1 = hypothesis_name(h1_labels);
  const std::string name2 = hypothesis_name(h2_labels);
  LabeledDataset relabeled;
  relabeled.schema = train.schema;
  for (const auto& s : train.samples) {
    if (h1.count(s.label) || h2.count(s.label)) {
      MinuteSample copy = s;
      copy.label = h1.count(s.label) ? name1 : name2;
      relabeled.samples.push_back(std::move(copy));
    }
  }
  relabeled.rebuild_vocabulary();
  if (relabeled.samples.empty()) throw ValidationError("fit_lr_system: no training samples");

  std::vector<std::string> labels;
  labels.reserve(relabeled.samples.size());
  for (const auto& s : relabeled.samples) labels.push_back(s.label);
  const ClassWeights weights = compute_class_weights(labels, {name1, name2});

  LrSystem sys;
  sys.model = fit_scorer(relabeled, {name1, name2}, config, weights);
  sys.h1_labels = h1_labels;
  sys.h2_labels = h2_labels;

  const Eigen::Index n = static_cast<Eigen::Index>(relabeled.samples.size());
  Eigen::ArrayXd scores(n);
  Eigen::ArrayXi truth(n);
  Eigen::ArrayXd cal_weights(n);
  std::size_t n1 = 0, n2 = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = relabeled.samples[static_cast<std::size_t>(i)];
    const Eigen::ArrayXd raw = sys.model.score(s);
    scores[i] = raw[0] - raw[1];
    truth[i] = s.label == name1 ? 1 : 0;
    cal_weights[i] = weights.at(s.label);
    (truth[i] == 1 ? n1 : n2) += 1;
  }
  sys.prior_odds = prior_odds_from_counts(n1, n2);
  sys.calibrator = fit_calibrator(calibrator, scores, truth,
                                  weight_calibration ? cal_weights : Eigen::ArrayXd());
  sys.bounds = compute_elub(scores, truth, sys.calibrator, sys.prior_odds);
  return sys;
}

Eigen::ArrayXd multiclass_likelihoods_from_scores(const Eigen::ArrayXd& raw_scores) {
  const Eigen::ArrayXd e = (raw_scores - raw_scores.maxCoeff()).exp();
  return e / e.sum();
}

Eigen::ArrayXd multiclass_likelihoods(const TreeEnsembleModel& model,
                                      const MinuteSample& sample) {
  return multiclass_likelihoods_from_scores(model.score(sample));
}

// ---------------------------------------------------------------------------

nlohmann::json LrSystem::to_json() const {
  nlohmann::json cal;
  if (const auto* lc = std::get_if<LogisticCalibrator>(&calibrator)) {
    cal = {{"kind", "logistic"}, {"w", lc->w}, {"m", lc->m}};
  } else if (const auto* gc = std::get_if<GaussianCalibrator>(&calibrator)) {
    cal = {{"kind", "gaussian"}, {"mu1", gc->mu1},  {"sigma1", gc->sigma1},
           {"mu2", gc->mu2},     {"sigma2", gc->sigma2}, {"pi1", gc->pi1},
           {"pi2", gc->pi2}};
  } else {
    const auto& kc = std::get<KdeCalibrator>(calibrator);
    std::vector<double> s1(kc.scores1.data(), kc.scores1.data() + kc.scores1.size());
    std::vector<double> s2(kc.scores2.data(), kc.scores2.data() + kc.scores2.size());
    cal = {{"kind", "kde"},           {"scores1", s1},
           {"scores2", s2},           {"bandwidth1", kc.bandwidth1},
           {"bandwidth2", kc.bandwidth2}, {"pi1", kc.pi1},
           {"pi2", kc.pi2}};
  }
  return {{"format", "trace2lr.lr_system"},
          {"version", 1},
          {"model", model.to_json()},
          {"hypotheses", {{"h1", h1_labels}, {"h2", h2_labels}}},
          {"calibrator", cal},
          {"prior_odds", {{"value", prior_odds.value}, {"n1", prior_odds.n1}, {"n2", prior_odds.n2}}},
          {"elub",
           {{"lower_log10", bounds.lower_log10},
            {"upper_log10", bounds.upper_log10},
            {"method", "surrogate: min(training LR range, log10(n+1) sample-size cap)"}}}};
}

LrSystem LrSystem::from_json(const nlohmann::json& j) {
  if (j.value("format", std::string()) != "trace2lr.lr_system")
    throw ValidationError("not a trace2lr LR-system file");
  LrSystem sys;
  sys.model = TreeEnsembleModel::from_json(j.at("model"));
  sys.h1_labels = j.at("hypotheses").at("h1").get<std::vector<std::string>>();
  sys.h2_labels = j.at("hypotheses").at("h2").get<std::vector<std::string>>();
  const auto& cal = j.at("calibrator");
  const std::string kind = cal.at("kind").get<std::string>();
  if (kind == "logistic") {
    LogisticCalibrator c;
    c.w = cal.at("w").get<double>();
    c.m = cal.at("m").get<double>();
    sys.calibrator = c;
  } else if (kind == "gaussian") {
    GaussianCalibrator c;
    c.mu1 = cal.at("mu1").get<double>();
    c.sigma1 = cal.at("sigma1").get<double>();
    c.mu2 = cal.at("mu2").get<double>();
    c.sigma2 = cal.at("sigma2").get<double>();
    c.pi1 = cal.at("pi1").get<double>();
    c.pi2 = cal.at("pi2").get<double>();
    sys.calibrator = c;
  } else if (kind == "kde") {
    KdeCalibrator c;
    const auto s1 = cal.at("scores1").get<std::vector<double>>();
    const auto s2 = cal.at("scores2").get<std::vector<double>>();
    c.scores1 = Eigen::Map<const Eigen::ArrayXd>(s1.data(), static_cast<Eigen::Index>(s1.size()));
    c.scores2 = Eigen::Map<const Eigen::ArrayXd>(s2.data(), static_cast<Eigen::Index>(s2.size()));
    c.bandwidth1 = cal.at("bandwidth1").get<double>();
    c.bandwidth2 = cal.at("bandwidth2").get<double>();
    c.pi1 = cal.at("pi1").get<double>();
    c.pi2 = cal.at("pi2").get<double>();
    sys.calibrator = c;
  } else {
    throw ValidationError("unknown calibrator kind '" + kind + "' in LR-system file");
  }
  sys.prior_odds.value = j.at("prior_odds").at("value").get<double>();
  sys.prior_odds.n1 = j.at("prior_odds").at("n1").get<std::size_t>();
  sys.prior_odds.n2 = j.at("prior_odds").at("n2").get<std::size_t>();
  sys.bounds.lower_log10 = j.at("elub").at("lower_log10").get<double>();
  sys.bounds.upper_log10 = j.at("elub").at("upper_log10").get<double>();
  return sys;
}

void LrSystem::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write LR-system file '" + path + "'");
  out << to_json().dump(1) << '\n';
}

LrSystem LrSystem::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open LR-system file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("LR-system file '" + path + "': " + e.what());
  }
  return from_json(j);
}

}  // namespace trace2lr
