// include/trace2lr/experiments.hpp

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

#ifndef TRACE2LR_EXPERIMENTS_HPP
#define TRACE2LR_EXPERIMENTS_HPP

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "trace2lr/calibration.hpp"
#include "trace2lr/metrics.hpp"
#include "trace2lr/stats.hpp"

namespace trace2lr {

// ---------------------------------------------------------------------------
// Subject-wise cross-validation
// ---------------------------------------------------------------------------

struct CvFold {
  std::vector<std::string> train_subjects;
  std::vector<std::string> validation_subjects;
};

struct CvPlan {
  std::vector<CvFold> folds;
};

/// Partitions the distinct subjects into n_folds validation groups (seeded
/// shuffle, round-robin assignment). Every subject validates exactly once
/// and never trains in its own fold.
CvPlan subjectwise_folds(const LabeledDataset& dataset, int n_folds, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Multilevel bootstrap
// ---------------------------------------------------------------------------

struct BootstrapPlan {
  int replicates = 1000;
  std::uint64_t seed = 0;
};

struct BootstrapResult {
  double mean = std::numeric_limits<double>::quiet_NaN();
  Eigen::ArrayXd replicates;
};

struct FactorTag {
  std::string phone;
  std::string location;
};

/// Metric over the selected row indices (with multiplicity). Return nullopt
/// when undefined for the selection (e.g. one hypothesis absent); the
/// replicate is then redrawn.
using BootstrapMetric = std::function<std::optional<double>(const std::vector<int>&)>;

/// Resamples carry locations and phone models with replacement (n draws from
/// n unique levels each); a replicate's validation set is every row whose
/// (phone, location) combination was drawn, with multiplicity. Empty or
/// undefined selections are redrawn, at most 100 times per replicate.
BootstrapResult multilevel_bootstrap(const std::vector<FactorTag>& rows,
                                     const BootstrapMetric& metric, const BootstrapPlan& plan);

// ---------------------------------------------------------------------------
// Shared experiment plumbing
// ---------------------------------------------------------------------------

/// One evaluated validation minute of a binary LR system.
struct EvalRow {
  double llr = 0.0;   // natural log, ELUB-bounded
  int label = 0;      // 1 = H1-true
  double score = 0.0; // raw scorer margin (PAV regressor)
  bool correct = false;
  std::string phone;
  std::string location;
};

struct ExperimentPlan {
  ScorerConfig scorer;
  CalibratorKind calibrator = CalibratorKind::logistic;
  int folds = 0;  // 0: leave-one-subject-out
  BootstrapPlan bootstrap;
  std::uint64_t seed = 0;
  int threads = 1;
};

/// Effective worker count: the TRACE2LR_THREADS environment variable caps
/// the requested value; requested <= 0 means "hardware concurrency".
int resolve_threads(int requested);

/// Deterministic parallel loop: item i runs exactly once, results must be
/// written to per-item slots.
void parallel_for(int n_items, int threads, const std::function<void(int)>& fn);

// ---------------------------------------------------------------------------
// Pairwise matrix and ablation
// ---------------------------------------------------------------------------

struct PairOutcome {
  std::string h1, h2;
  bool present = false;
  double cllr = std::numeric_limits<double>::quiet_NaN();
  double cllr_min = std::numeric_limits<double>::quiet_NaN();
  double accuracy = std::numeric_limits<double>::quiet_NaN();
  int n_rows = 0;
  Eigen::ArrayXd importance;  // raw per-variable gains (when collected)
};

struct PairwiseRun {
  std::vector<std::string> activities;
  std::vector<PairOutcome> pairs;  // (r, c) for r > c, H1 = activities[r]
};

struct PairwiseOptions {
  bool collect_importance = false;
};

PairwiseRun run_pairwise(const LabeledDataset& dataset,
                         const std::vector<std::string>& activities, const ExperimentPlan& plan,
                         const PairwiseOptions& options = {});

/// Subject-wise cross-validated evaluation of one binary system (hypotheses
/// may be label sets). Validation llrs are pooled across folds.
struct PairEvaluation {
  std::vector<EvalRow> rows;
  CllrReport report;            // pooled-point metrics
  double bootstrap_cllr = std::numeric_limits<double>::quiet_NaN();
  double bootstrap_cllr_min = std::numeric_limits<double>::quiet_NaN();
  int n1 = 0, n2 = 0;

  BinaryEvalSet eval_set() const;
  Eigen::ArrayXd scores() const;
};

PairEvaluation evaluate_pair(const LabeledDataset& dataset,
                             const std::vector<std::string>& h1_labels,
                             const std::vector<std::string>& h2_labels,
                             const ExperimentPlan& plan);

/// Bootstrap-mean Cllr in the lower triangle, Cllr_min in the upper one,
/// per-activity mean Cllr on the diagonal. Absent cells are NaN.
struct PairwiseMatrixReport {
  std::vector<std::string> activities;
  Eigen::MatrixXd cells;     // see triangle convention above
  Eigen::ArrayXd diagonal;   // mean cllr across the pairings of each activity

  nlohmann::json to_json() const;
};

PairwiseMatrixReport pairwise_matrix(const PairwiseRun& run);

struct AblationRow {
  ScorerFamily family;
  CalibratorKind calibrator;
  double accuracy = 0.0;   // mean over pairings, percent
  double mean_cllr = 0.0;
  std::array<double, 4> pct_below{};  // thresholds 1.00, 0.75, 0.50, 0.25
  int n_pairs = 0;
};

inline constexpr std::array<double, 4> kAblationThresholds{1.00, 0.75, 0.50, 0.25};

std::vector<AblationRow> ablation_sweep(const LabeledDataset& dataset,
                                        const std::vector<std::string>& activities,
                                        const std::vector<ScorerFamily>& families,
                                        const std::vector<CalibratorKind>& calibrators,
                                        const ExperimentPlan& plan);

// ---------------------------------------------------------------------------
// Sensitivity analysis (leave-one-factor-level-out)
// ---------------------------------------------------------------------------

enum class Factor { phone, location };
const char* to_string(Factor f);
Factor factor_from_string(const std::string& s);

struct SensitivityObservation {
  std::string h1, h2, level;
  double cllr_separated = 0.0;
  double cllr_control = 0.0;
  double delta = 0.0;  // separated - control
};

struct SensitivityLevel {
  std::string level;
  int n_pairs = 0;
  double mean_delta = 0.0;
  WilcoxonResult test;
};

struct SensitivityReport {
  Factor factor = Factor::phone;
  std::vector<SensitivityObservation> observations;
  std::vector<SensitivityLevel> levels;
  double mean_delta = 0.0;
  WilcoxonResult overall;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
};

/// Row indices (into dataset.samples) of the leave-one-level-out split for
/// one fold of one activity pair: the held-out level never appears in the
/// training rows, the validation rows carry nothing else.
struct FactorSplit {
  std::vector<int> train_rows;
  std::vector<int> validation_rows;
};

FactorSplit leave_factor_split(const LabeledDataset& dataset, const CvFold& fold,
                               const std::string& h1, const std::string& h2, Factor factor,
                               const std::string& level);

/// For every level of the factor and every activity pair: retrain with the
/// level removed from training and only the level kept in validation, paired
/// with a size-matched random-removal control; one-sided Wilcoxon on the
/// Cllr differences.
SensitivityReport sensitivity_leave_factor(const LabeledDataset& dataset,
                                           const std::vector<std::string>& activities,
                                           Factor factor, const ExperimentPlan& plan);

// ---------------------------------------------------------------------------
// Activity groups, group sweep, timelines
// ---------------------------------------------------------------------------

/// Disjoint named groups of activity labels; activities outside every group
/// are excluded before fitting.
struct ActivityGrouping {
  std::vector<std::pair<std::string, std::vector<std::string>>> groups;

  void validate() const;  // disjointness, non-empty names
  std::optional<std::string> group_of(const std::string& activity) const;
  std::vector<std::string> group_names() const;

  static ActivityGrouping from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// The expert grouping of the 19-activity vocabulary.
ActivityGrouping default_expert_grouping();

struct GroupSweepRow {
  std::vector<std::string> groups;
  bool present = false;
  double cmxe_norm = std::numeric_limits<double>::quiet_NaN();
  int n_rows = 0;
};

/// Cross-validated, bootstrap-aggregated normalized Cmxe of the multiclass
/// system restricted to one subset of groups.
GroupSweepRow evaluate_group_subset(const LabeledDataset& dataset,
                                    const ActivityGrouping& grouping,
                                    const std::vector<std::string>& subset,
                                    const ExperimentPlan& plan);

/// Normalized Cmxe of the multiclass system for every subset of >= 2 groups.
std::vector<GroupSweepRow> group_sweep(const LabeledDataset& dataset,
                                       const ActivityGrouping& grouping,
                                       const ExperimentPlan& plan);

struct Timeline {
  std::vector<UtcSeconds> minutes;
  std::vector<std::string> class_order;  // group names
  Eigen::MatrixXd likelihoods;           // T x G, rows sum to 1
  std::vector<int> predicted;            // argmax per row (ties: first class)
  std::vector<int> truth;                // group index or -1

  int correct_count() const;
  int labeled_count() const;
};

/// Per-minute group likelihoods for an ordered sample sequence. The model
/// must be trained on the grouping's group names.
Timeline build_timeline(const TreeEnsembleModel& model, const std::vector<MinuteSample>& samples,
                        const ActivityGrouping& grouping);

/// Relabels activities by group membership, dropping ungrouped samples.
LabeledDataset relabel_by_groups(const LabeledDataset& dataset, const ActivityGrouping& grouping,
                                 const std::vector<std::string>& subset);

}  // namespace trace2lr

#endif  // TRACE2LR_EXPERIMENTS_HPP
