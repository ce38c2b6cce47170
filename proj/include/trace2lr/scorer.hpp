// include/trace2lr/scorer.hpp

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

#ifndef TRACE2LR_SCORER_HPP
#define TRACE2LR_SCORER_HPP

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "trace2lr/dataset.hpp"
#include "trace2lr/encoding.hpp"

namespace trace2lr {

enum class ScorerFamily { gradient_boosted, bagged_ensemble, single_tree };

const char* to_string(ScorerFamily f);
ScorerFamily scorer_family_from_string(const std::string& s);

struct ScorerConfig {
  ScorerFamily family = ScorerFamily::gradient_boosted;
  int rounds = 200;           // boosting rounds / tree count for bagged
  int max_depth = 6;          // ignored by single_tree (grows to min_samples_leaf)
  double learning_rate = 0.1; // ignored by non-boosted families
  int min_samples_leaf = 5;
  std::uint64_t seed = 0;

  static ScorerConfig defaults_for(ScorerFamily family);
  void validate() const;
};

/// Inverse-frequency class weights, normalized so the per-sample mean is 1:
/// w(k) = N / (K * count(k)).
struct ClassWeights {
  std::map<std::string, double> weights;

  double at(const std::string& label) const;
  static ClassWeights uniform(const std::vector<std::string>& classes);
};

/// `classes` restricts and validates; empty means "all labels present".
ClassWeights compute_class_weights(const std::vector<std::string>& labels,
                                   const std::vector<std::string>& classes = {});

/// One encoded numeric column of the model's feature space: either a numeric
/// variable verbatim, or the ordered-target encoding of a categorical
/// variable against one class.
struct EncodedColumn {
  int variable = -1;
  int target_class = -1;  // -1: numeric passthrough
};

struct TreeNode {
  int feature = -1;  // encoded-column index; -1 marks a leaf
  double threshold = 0.0;  // go left iff x < threshold (missing per flag)
  bool missing_left = true;
  double gain = 0.0;  // split quality, feeds variable importance
  std::int32_t left = -1;
  std::int32_t right = -1;
  Eigen::ArrayXd leaf;  // payload at leaves

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  int class_index = -1;  // >= 0: leaf payload is a scalar for this class
  double scale = 1.0;
  std::vector<TreeNode> nodes;

  /// Index of the leaf reached by an encoded feature vector (NaN = missing).
  int leaf_index(const Eigen::ArrayXd& x) const;
};

/// Additive ensemble of decision trees over the encoded feature space.
/// Immutable after fit; safe for concurrent scoring.
class TreeEnsembleModel {
 public:
  const std::vector<std::string>& class_order() const { return class_order_; }
  const VariableSchema& schema() const { return schema_; }
  const ScorerConfig& config() const { return config_; }
  const std::vector<Tree>& trees() const { return trees_; }
  std::vector<Tree>& mutable_trees() { return trees_; }
  const std::vector<double>& train_loss() const { return train_loss_; }
  const std::vector<EncodedColumn>& columns() const { return columns_; }

  /// Maps sample features onto the encoded numeric space (NaN = missing).
  Eigen::ArrayXd encode(const MinuteSample& sample) const;
  Eigen::ArrayXd encode(const std::vector<FeatureValue>& features) const;

  /// Raw per-class scores on an unnormalized log-odds scale.
  Eigen::ArrayXd score(const MinuteSample& sample) const;
  Eigen::ArrayXd score_encoded(const Eigen::ArrayXd& x) const;

  /// Split gains summed per original variable (encoded columns merged back).
  Eigen::ArrayXd importance_raw() const;

  nlohmann::json to_json() const;
  static TreeEnsembleModel from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static TreeEnsembleModel load(const std::string& path);

 private:
  friend TreeEnsembleModel fit_scorer(const LabeledDataset&, const std::vector<std::string>&,
                                      const ScorerConfig&, const ClassWeights&);

  VariableSchema schema_;
  std::vector<std::string> class_order_;
  ScorerConfig config_;
  std::vector<EncodedColumn> columns_;
  // One encoder per categorical variable and class, keyed by encoded column.
  std::map<int, CategoryEncoderState> encoders_;
  std::vector<Tree> trees_;
  std::vector<double> train_loss_;  // weighted multinomial log-loss per round
};

/// Trains a scorer on the samples of `train` whose label is in `classes`
/// (order defines the class order). Deterministic given the config seed.
TreeEnsembleModel fit_scorer(const LabeledDataset& train, const std::vector<std::string>& classes,
                             const ScorerConfig& config, const ClassWeights& weights);

inline Eigen::ArrayXd score(const TreeEnsembleModel& model, const MinuteSample& sample) {
  return model.score(sample);
}

/// Per-(variable, activity) importance matrix, each row normalized to max 1,
/// variables ordered by descending mean importance.
struct ImportanceReport {
  std::vector<std::string> variables;
  std::vector<std::string> activities;
  Eigen::MatrixXd values;  // activities x variables

  /// Builds the report from raw per-variable importance vectors accumulated
  /// per activity (e.g. over all pairings involving the activity).
  static ImportanceReport from_accumulated(
      const std::vector<std::string>& variable_names,
      const std::map<std::string, Eigen::ArrayXd>& per_activity_raw);
};

/// Single-model importance: report with one row per model class, both rows
/// backed by the same per-variable gains for tree families whose splits are
/// not class-specific.
ImportanceReport variable_importance(const TreeEnsembleModel& model);

}  // namespace trace2lr

#endif  // TRACE2LR_SCORER_HPP
