// src/scorer.cpp

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

#include "trace2lr/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "trace2lr/common.hpp"

namespace trace2lr {

namespace {

constexpr double kLeafL2 = 1.0;        // L2 regularization on leaf values
constexpr double kMinSplitGain = 1e-12;
constexpr double kMinHessian = 1e-16;
constexpr int kMaxBins = 255;
constexpr std::uint16_t kMissingBin = 0xFFFF;
constexpr double kEncodingPrior = 1.0;

nlohmann::json num_to_json(double v) {
  if (std::isfinite(v)) return v;
  if (v > 0) return "inf";
  if (v < 0) return "-inf";
  return "nan";
}

double num_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    return std::numeric_limits<double>::quiet_NaN();
  }
  return j.get<double>();
}

struct BinnedData {
  Eigen::Matrix<std::uint16_t, Eigen::Dynamic, Eigen::Dynamic> bins;  // n x F
  std::vector<std::vector<double>> cuts;                              // per feature
};

/// Quantile cut points over the finite values of each column. Bin b holds
/// x with exactly b cuts <= x, so "x < cuts[c]" keeps bins 0..c on the left.
BinnedData bin_features(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows(), f_count = x.cols();
  BinnedData bd;
  bd.bins.resize(n, f_count);
  bd.cuts.resize(static_cast<std::size_t>(f_count));
  std::vector<double> finite;
  for (Eigen::Index f = 0; f < f_count; ++f) {
    finite.clear();
    for (Eigen::Index i = 0; i < n; ++i)
      if (!std::isnan(x(i, f))) finite.push_back(x(i, f));
    std::sort(finite.begin(), finite.end());
    auto& cuts = bd.cuts[static_cast<std::size_t>(f)];
    if (!finite.empty()) {
      std::vector<double> distinct(finite);
      distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
      if (static_cast<int>(distinct.size()) <= kMaxBins) {
        cuts.assign(distinct.begin() + 1, distinct.end());
      } else {
        for (int b = 1; b < kMaxBins; ++b) {
          const std::size_t pos = static_cast<std::size_t>(
              (static_cast<long long>(b) * static_cast<long long>(finite.size())) / kMaxBins);
          cuts.push_back(finite[std::min(pos, finite.size() - 1)]);
        }
        std::sort(cuts.begin(), cuts.end());
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
        if (!cuts.empty() && cuts.front() == distinct.front())
          cuts.erase(cuts.begin());  // a cut at the minimum separates nothing
      }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const double v = x(i, f);
      if (std::isnan(v)) {
        bd.bins(i, f) = kMissingBin;
      } else {
        bd.bins(i, f) = static_cast<std::uint16_t>(
            std::upper_bound(cuts.begin(), cuts.end(), v) - cuts.begin());
      }
    }
  }
  return bd;
}

struct SplitCandidate {
  bool valid = false;
  int feature = -1;
  double threshold = 0.0;
  bool missing_left = true;
  double gain = 0.0;
};

// ---------------------------------------------------------------------------
// Gradient (second-order) trees
// ---------------------------------------------------------------------------

double leaf_objective(double g, double h) { return g * g / (h + kLeafL2); }

SplitCandidate best_gradient_split(const BinnedData& bd, const Eigen::ArrayXd& grad,
                                   const Eigen::ArrayXd& hess, const std::vector<int>& rows,
                                   int min_leaf, const std::vector<int>& features) {
  SplitCandidate best;
  double g_total = 0, h_total = 0;
  for (int i : rows) {
    g_total += grad[i];
    h_total += hess[i];
  }
  const double parent = leaf_objective(g_total, h_total);
  const int n_total = static_cast<int>(rows.size());

  std::vector<double> hg, hh;
  std::vector<int> hn;
  for (int f : features) {
    const auto& cuts = bd.cuts[static_cast<std::size_t>(f)];
    const int m = static_cast<int>(cuts.size());
    hg.assign(static_cast<std::size_t>(m) + 1, 0.0);
    hh.assign(static_cast<std::size_t>(m) + 1, 0.0);
    hn.assign(static_cast<std::size_t>(m) + 1, 0);
    double miss_g = 0, miss_h = 0;
    int miss_n = 0;
    for (int i : rows) {
      const std::uint16_t b = bd.bins(i, f);
      if (b == kMissingBin) {
        miss_g += grad[i];
        miss_h += hess[i];
        ++miss_n;
      } else {
        hg[b] += grad[i];
        hh[b] += hess[i];
        ++hn[b];
      }
    }

    auto consider = [&](double gl, double hl, int nl, bool missing_left, double threshold) {
      const int nr = n_total - nl;
      if (nl < min_leaf || nr < min_leaf) return;
      const double gr = g_total - gl;
      const double hr = h_total - hl;
      const double gain = 0.5 * (leaf_objective(gl, hl) + leaf_objective(gr, hr) - parent);
      if (gain > best.gain + kMinSplitGain) best = {true, f, threshold, missing_left, gain};
    };

    double gl = 0, hl = 0;
    int nl = 0;
    for (int c = 0; c < m; ++c) {
      gl += hg[static_cast<std::size_t>(c)];
      hl += hh[static_cast<std::size_t>(c)];
      nl += hn[static_cast<std::size_t>(c)];
      if (miss_n > 0) {
        consider(gl + miss_g, hl + miss_h, nl + miss_n, true, cuts[static_cast<std::size_t>(c)]);
        consider(gl, hl, nl, false, cuts[static_cast<std::size_t>(c)]);
      } else {
        consider(gl, hl, nl, true, cuts[static_cast<std::size_t>(c)]);
      }
    }
    if (miss_n > 0 && miss_n < n_total) {
      // Finite values left, missing right.
      consider(g_total - miss_g, h_total - miss_h, n_total - miss_n, false,
               std::numeric_limits<double>::infinity());
    }
  }
  return best;
}

struct GrowItem {
  int node = 0;
  int depth = 0;
  std::vector<int> rows;
};

Tree grow_gradient_tree(const BinnedData& bd, const Eigen::MatrixXd& x,
                        const Eigen::ArrayXd& grad, const Eigen::ArrayXd& hess,
                        const std::vector<int>& root_rows, int max_depth, int min_leaf,
                        double shrinkage, int class_index, const std::vector<int>& features,
                        Eigen::ArrayXd* prediction_out) {
  Tree tree;
  tree.class_index = class_index;
  tree.nodes.emplace_back();
  std::vector<GrowItem> queue;
  queue.push_back({0, 0, root_rows});
  for (std::size_t qi = 0; qi < queue.size(); ++qi) {
    GrowItem item = std::move(queue[qi]);
    SplitCandidate split;
    if (item.depth < max_depth)
      split = best_gradient_split(bd, grad, hess, item.rows, min_leaf, features);
    TreeNode& node = tree.nodes[static_cast<std::size_t>(item.node)];
    if (!split.valid) {
      double g = 0, h = 0;
      for (int i : item.rows) {
        g += grad[i];
        h += hess[i];
      }
      const double value = -g / (h + kLeafL2) * shrinkage;
      node.leaf = Eigen::ArrayXd::Constant(1, value);
      if (prediction_out)
        for (int i : item.rows) (*prediction_out)[i] = value;
      continue;
    }
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.missing_left = split.missing_left;
    node.gain = split.gain;
    GrowItem left{static_cast<int>(tree.nodes.size()), item.depth + 1, {}};
    GrowItem right{static_cast<int>(tree.nodes.size()) + 1, item.depth + 1, {}};
    node.left = left.node;
    node.right = right.node;
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    for (int i : item.rows) {
      const double v = x(i, split.feature);
      const bool go_left = std::isnan(v) ? split.missing_left : v < split.threshold;
      (go_left ? left.rows : right.rows).push_back(i);
    }
    queue.push_back(std::move(left));
    queue.push_back(std::move(right));
  }
  return tree;
}

// ---------------------------------------------------------------------------
// Gini (class-frequency) trees for the bagged and single-tree families
// ---------------------------------------------------------------------------

double gini_score(const Eigen::ArrayXd& wk, double w) {
  // Weighted impurity mass: W * gini(node) = W - sum(Wk^2) / W.
  if (w <= 0) return 0.0;
  return w - wk.square().sum() / w;
}

SplitCandidate best_gini_split(const BinnedData& bd, const Eigen::ArrayXi& y,
                               const Eigen::ArrayXd& w, const std::vector<int>& rows, int k_count,
                               int min_leaf, const std::vector<int>& features) {
  SplitCandidate best;
  Eigen::ArrayXd wk_total = Eigen::ArrayXd::Zero(k_count);
  for (int i : rows) wk_total[y[i]] += w[i];
  const double w_total = wk_total.sum();
  const double parent = gini_score(wk_total, w_total);
  const int n_total = static_cast<int>(rows.size());

  for (int f : features) {
    const auto& cuts = bd.cuts[static_cast<std::size_t>(f)];
    const int m = static_cast<int>(cuts.size());
    Eigen::MatrixXd hist = Eigen::MatrixXd::Zero(m + 1, k_count);
    std::vector<int> hn(static_cast<std::size_t>(m) + 1, 0);
    Eigen::ArrayXd miss_k = Eigen::ArrayXd::Zero(k_count);
    int miss_n = 0;
    for (int i : rows) {
      const std::uint16_t b = bd.bins(i, f);
      if (b == kMissingBin) {
        miss_k[y[i]] += w[i];
        ++miss_n;
      } else {
        hist(b, y[i]) += w[i];
        ++hn[b];
      }
    }

    auto consider = [&](const Eigen::ArrayXd& wl, int nl, bool missing_left, double threshold) {
      const int nr = n_total - nl;
      if (nl < min_leaf || nr < min_leaf) return;
      const Eigen::ArrayXd wr = wk_total - wl;
      const double gain = parent - gini_score(wl, wl.sum()) - gini_score(wr, wr.sum());
      if (gain > best.gain + kMinSplitGain) best = {true, f, threshold, missing_left, gain};
    };

    Eigen::ArrayXd wl = Eigen::ArrayXd::Zero(k_count);
    int nl = 0;
    for (int c = 0; c < m; ++c) {
      wl += hist.row(c).transpose().array();
      nl += hn[static_cast<std::size_t>(c)];
      if (miss_n > 0) {
        consider(wl + miss_k, nl + miss_n, true, cuts[static_cast<std::size_t>(c)]);
        consider(wl, nl, false, cuts[static_cast<std::size_t>(c)]);
      } else {
        consider(wl, nl, true, cuts[static_cast<std::size_t>(c)]);
      }
    }
    if (miss_n > 0 && miss_n < n_total) {
      consider(wk_total - miss_k, n_total - miss_n, false,
               std::numeric_limits<double>::infinity());
    }
  }
  return best;
}

Eigen::ArrayXd gini_leaf(const Eigen::ArrayXi& y, const Eigen::ArrayXd& w,
                         const std::vector<int>& rows, int k_count) {
  Eigen::ArrayXd wk = Eigen::ArrayXd::Zero(k_count);
  for (int i : rows) wk[y[i]] += w[i];
  const double total = wk.sum();
  // Laplace-smoothed log class probabilities.
  return ((wk + 1.0) / (total + static_cast<double>(k_count))).log();
}

Tree grow_gini_tree(const BinnedData& bd, const Eigen::MatrixXd& x, const Eigen::ArrayXi& y,
                    const Eigen::ArrayXd& w, const std::vector<int>& root_rows, int k_count,
                    int max_depth, int min_leaf, int feature_subset, std::mt19937_64& rng) {
  Tree tree;
  tree.class_index = -1;
  tree.nodes.emplace_back();
  const int f_count = static_cast<int>(bd.cuts.size());
  std::vector<int> all_features(static_cast<std::size_t>(f_count));
  std::iota(all_features.begin(), all_features.end(), 0);

  std::vector<GrowItem> queue;
  queue.push_back({0, 0, root_rows});
  for (std::size_t qi = 0; qi < queue.size(); ++qi) {
    GrowItem item = std::move(queue[qi]);
    std::vector<int> features = all_features;
    if (feature_subset > 0 && feature_subset < f_count) {
      // Partial Fisher-Yates draw of a sorted feature subset per split.
      std::vector<int> pool = all_features;
      features.clear();
      for (int d = 0; d < feature_subset; ++d) {
        const std::size_t j =
            static_cast<std::size_t>(d) +
            static_cast<std::size_t>(bounded_rand(rng, pool.size() - static_cast<std::size_t>(d)));
        std::swap(pool[static_cast<std::size_t>(d)], pool[j]);
        features.push_back(pool[static_cast<std::size_t>(d)]);
      }
      std::sort(features.begin(), features.end());
    }
    SplitCandidate split;
    if (max_depth <= 0 || item.depth < max_depth)
      split = best_gini_split(bd, y, w, item.rows, k_count, min_leaf, features);
    TreeNode& node = tree.nodes[static_cast<std::size_t>(item.node)];
    if (!split.valid) {
      node.leaf = gini_leaf(y, w, item.rows, k_count);
      continue;
    }
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.missing_left = split.missing_left;
    node.gain = split.gain;
    GrowItem left{static_cast<int>(tree.nodes.size()), item.depth + 1, {}};
    GrowItem right{static_cast<int>(tree.nodes.size()) + 1, item.depth + 1, {}};
    node.left = left.node;
    node.right = right.node;
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    for (int i : item.rows) {
      const double v = x(i, split.feature);
      const bool go_left = std::isnan(v) ? split.missing_left : v < split.threshold;
      (go_left ? left.rows : right.rows).push_back(i);
    }
    queue.push_back(std::move(left));
    queue.push_back(std::move(right));
  }
  return tree;
}

Eigen::ArrayXd softmax_row(const Eigen::ArrayXd& v) {
  const Eigen::ArrayXd e = (v - v.maxCoeff()).exp();
  return e / e.sum();
}

}  // namespace

// ---------------------------------------------------------------------------

const char* to_string(ScorerFamily f) {
  switch (f) {
    case ScorerFamily::gradient_boosted:
      return "gradient_boosted";
    case ScorerFamily::bagged_ensemble:
      return "bagged_ensemble";
    case ScorerFamily::single_tree:
      return "single_tree";
  }
  return "unknown";
}

ScorerFamily scorer_family_from_string(const std::string& s) {
  if (s == "gradient_boosted") return ScorerFamily::gradient_boosted;
  if (s == "bagged_ensemble") return ScorerFamily::bagged_ensemble;
  if (s == "single_tree") return ScorerFamily::single_tree;
  throw ValidationError("unknown scorer family '" + s + "'");
}

ScorerConfig ScorerConfig::defaults_for(ScorerFamily family) {
  ScorerConfig c;
  c.family = family;
  switch (family) {
    case ScorerFamily::gradient_boosted:
      c.rounds = 200;
      break;
    case ScorerFamily::bagged_ensemble:
      c.rounds = 100;
      break;
    case ScorerFamily::single_tree:
      c.rounds = 1;
      break;
  }
  return c;
}

void ScorerConfig::validate() const {
  if (rounds < 1) throw ValidationError("scorer config: rounds must be >= 1");
  if (max_depth < 1) throw ValidationError("scorer config: max_depth must be >= 1");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0))
    throw ValidationError("scorer config: learning_rate must be in (0, 1]");
  if (min_samples_leaf < 1) throw ValidationError("scorer config: min_samples_leaf must be >= 1");
}

double ClassWeights::at(const std::string& label) const {
  auto it = weights.find(label);
  if (it == weights.end()) throw ValidationError("no class weight for label '" + label + "'");
  return it->second;
}

ClassWeights ClassWeights::uniform(const std::vector<std::string>& classes) {
  ClassWeights w;
  for (const auto& c : classes) w.weights[c] = 1.0;
  return w;
}

ClassWeights compute_class_weights(const std::vector<std::string>& labels,
                                   const std::vector<std::string>& classes) {
  std::map<std::string, std::size_t> counts;
  std::size_t total = 0;
  for (const auto& l : labels) {
    if (!classes.empty() && std::find(classes.begin(), classes.end(), l) == classes.end())
      continue;
    ++counts[l];
    ++total;
  }
  const std::vector<std::string>* wanted = &classes;
  std::vector<std::string> derived;
  if (classes.empty()) {
    for (const auto& [l, n] : counts) derived.push_back(l);
    wanted = &derived;
  }
  if (wanted->empty()) throw ValidationError("compute_class_weights: no classes");
  ClassWeights w;
  const double k = static_cast<double>(wanted->size());
  for (const auto& c : *wanted) {
    auto it = counts.find(c);
    if (it == counts.end() || it->second == 0)
      throw ValidationError("class '" + c + "' has no samples");
    w.weights[c] = static_cast<double>(total) / (k * static_cast<double>(it->second));
  }
  return w;
}

int Tree::leaf_index(const Eigen::ArrayXd& x) const {
  int idx = 0;
  while (!nodes[static_cast<std::size_t>(idx)].is_leaf()) {
    const TreeNode& n = nodes[static_cast<std::size_t>(idx)];
    const double v = x[n.feature];
    const bool go_left = std::isnan(v) ? n.missing_left : v < n.threshold;
    idx = go_left ? n.left : n.right;
  }
  return idx;
}

Eigen::ArrayXd TreeEnsembleModel::encode(const MinuteSample& sample) const {
  return encode(sample.features);
}

Eigen::ArrayXd TreeEnsembleModel::encode(const std::vector<FeatureValue>& features) const {
  if (static_cast<int>(features.size()) != schema_.size())
    throw ValidationError("sample does not conform to the model schema");
  Eigen::ArrayXd x(static_cast<Eigen::Index>(columns_.size()));
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    const auto& col = columns_[c];
    const FeatureValue& v = features[static_cast<std::size_t>(col.variable)];
    if (col.target_class < 0) {
      x[static_cast<Eigen::Index>(c)] =
          v.is_missing() ? std::numeric_limits<double>::quiet_NaN() : v.num;
    } else {
      x[static_cast<Eigen::Index>(c)] = encoders_.at(static_cast<int>(c)).encode(v);
    }
  }
  return x;
}

Eigen::ArrayXd TreeEnsembleModel::score_encoded(const Eigen::ArrayXd& x) const {
  Eigen::ArrayXd acc = Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(class_order_.size()));
  for (const auto& tree : trees_) {
    const TreeNode& leaf = tree.nodes[static_cast<std::size_t>(tree.leaf_index(x))];
    if (tree.class_index >= 0)
      acc[tree.class_index] += tree.scale * leaf.leaf[0];
    else
      acc += tree.scale * leaf.leaf;
  }
  return acc;
}

Eigen::ArrayXd TreeEnsembleModel::score(const MinuteSample& sample) const {
  return score_encoded(encode(sample));
}

Eigen::ArrayXd TreeEnsembleModel::importance_raw() const {
  Eigen::ArrayXd imp = Eigen::ArrayXd::Zero(schema_.size());
  for (const auto& tree : trees_)
    for (const auto& node : tree.nodes)
      if (!node.is_leaf()) imp[columns_[static_cast<std::size_t>(node.feature)].variable] += node.gain;
  return imp;
}

TreeEnsembleModel fit_scorer(const LabeledDataset& train, const std::vector<std::string>& classes,
                             const ScorerConfig& config, const ClassWeights& weights) {
  config.validate();
  if (classes.size() < 2) throw ValidationError("fit_scorer: need at least two classes");
  {
    std::set<std::string> uniq(classes.begin(), classes.end());
    if (uniq.size() != classes.size()) throw ValidationError("fit_scorer: duplicate class label");
  }

  std::map<std::string, int> class_index;
  for (std::size_t k = 0; k < classes.size(); ++k) class_index[classes[k]] = static_cast<int>(k);

  std::vector<int> rows;
  for (std::size_t i = 0; i < train.samples.size(); ++i)
    if (class_index.count(train.samples[i].label)) rows.push_back(static_cast<int>(i));
  if (rows.empty()) throw ValidationError("fit_scorer: empty training set");

  const int n = static_cast<int>(rows.size());
  const int k_count = static_cast<int>(classes.size());
  Eigen::ArrayXi y(n);
  Eigen::ArrayXd w(n);
  std::vector<int> per_class_count(static_cast<std::size_t>(k_count), 0);
  for (int i = 0; i < n; ++i) {
    const auto& s = train.samples[static_cast<std::size_t>(rows[static_cast<std::size_t>(i)])];
    y[i] = class_index.at(s.label);
    w[i] = weights.at(s.label);
    ++per_class_count[static_cast<std::size_t>(y[i])];
  }
  for (int k = 0; k < k_count; ++k)
    if (per_class_count[static_cast<std::size_t>(k)] == 0)
      throw ValidationError("fit_scorer: class '" + classes[static_cast<std::size_t>(k)] +
                            "' has no training samples");

  TreeEnsembleModel model;
  model.schema_ = train.schema;
  model.class_order_ = classes;
  model.config_ = config;

  // Encoded feature space: numeric variables verbatim, categorical variables
  // as one ordered-target-encoded column per class.
  std::mt19937_64 perm_rng(derive_seed(config.seed, "ordered-encoding-permutation"));
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  fisher_yates_shuffle(perm, perm_rng);

  for (int v = 0; v < train.schema.size(); ++v) {
    if (train.schema.at(v).is_numeric()) {
      model.columns_.push_back({v, -1});
    } else {
      for (int k = 0; k < k_count; ++k) model.columns_.push_back({v, k});
    }
  }
  const int f_count = static_cast<int>(model.columns_.size());
  Eigen::MatrixXd x(n, f_count);
  for (int c = 0; c < f_count; ++c) {
    const auto& col = model.columns_[static_cast<std::size_t>(c)];
    if (col.target_class < 0) {
      for (int i = 0; i < n; ++i) {
        const FeatureValue& fv =
            train.samples[static_cast<std::size_t>(rows[static_cast<std::size_t>(i)])]
                .features[static_cast<std::size_t>(col.variable)];
        x(i, c) = fv.is_missing() ? std::numeric_limits<double>::quiet_NaN() : fv.num;
      }
    } else {
      std::vector<std::optional<std::string>> column(static_cast<std::size_t>(n));
      std::vector<double> targets(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        const FeatureValue& fv =
            train.samples[static_cast<std::size_t>(rows[static_cast<std::size_t>(i)])]
                .features[static_cast<std::size_t>(col.variable)];
        if (!fv.is_missing()) column[static_cast<std::size_t>(i)] = fv.tok;
        targets[static_cast<std::size_t>(i)] = y[i] == col.target_class ? 1.0 : 0.0;
      }
      std::vector<double> encoded;
      model.encoders_[c] =
          fit_ordered_encoder(column, targets, perm, kEncodingPrior, &encoded);
      for (int i = 0; i < n; ++i) x(i, c) = encoded[static_cast<std::size_t>(i)];
    }
  }

  const BinnedData binned = bin_features(x);
  std::vector<int> all_rows(static_cast<std::size_t>(n));
  std::iota(all_rows.begin(), all_rows.end(), 0);
  std::vector<int> all_features(static_cast<std::size_t>(f_count));
  std::iota(all_features.begin(), all_features.end(), 0);

  switch (config.family) {
    case ScorerFamily::gradient_boosted: {
      Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(n, k_count);
      const double w_sum = w.sum();
      auto record_loss = [&]() {
        double loss = 0;
        for (int i = 0; i < n; ++i) {
          const Eigen::ArrayXd row = scores.row(i).transpose().array();
          const double m = row.maxCoeff();
          loss += w[i] * (m + std::log((row - m).exp().sum()) - row[y[i]]);
        }
        model.train_loss_.push_back(loss / w_sum);
      };
      record_loss();
      for (int round = 0; round < config.rounds; ++round) {
        for (int k = 0; k < k_count; ++k) {
          Eigen::ArrayXd grad(n), hess(n);
          for (int i = 0; i < n; ++i) {
            const Eigen::ArrayXd p = softmax_row(scores.row(i).transpose().array());
            const double pk = p[k];
            grad[i] = w[i] * (pk - (y[i] == k ? 1.0 : 0.0));
            hess[i] = std::max(w[i] * pk * (1.0 - pk), kMinHessian);
          }
          Eigen::ArrayXd delta = Eigen::ArrayXd::Zero(n);
          Tree tree = grow_gradient_tree(binned, x, grad, hess, all_rows, config.max_depth,
                                         config.min_samples_leaf, config.learning_rate, k,
                                         all_features, &delta);
          scores.col(k) += delta.matrix();
          model.trees_.push_back(std::move(tree));
        }
        record_loss();
      }
      break;
    }
    case ScorerFamily::bagged_ensemble: {
      const int n_trees = config.rounds;
      const int subset = std::max(1, static_cast<int>(std::ceil(std::sqrt(
                                         static_cast<double>(f_count)))));
      for (int t = 0; t < n_trees; ++t) {
        std::mt19937_64 rng(derive_seed(config.seed, "bagged-tree-" + std::to_string(t)));
        std::vector<int> sample_rows(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i)
          sample_rows[static_cast<std::size_t>(i)] =
              static_cast<int>(bounded_rand(rng, static_cast<std::uint64_t>(n)));
        Tree tree = grow_gini_tree(binned, x, y, w, sample_rows, k_count, config.max_depth,
                                   config.min_samples_leaf, subset, rng);
        tree.scale = 1.0 / static_cast<double>(n_trees);
        model.trees_.push_back(std::move(tree));
      }
      break;
    }
    case ScorerFamily::single_tree: {
      std::mt19937_64 rng(derive_seed(config.seed, "single-tree"));
      Tree tree = grow_gini_tree(binned, x, y, w, all_rows, k_count, /*max_depth=*/0,
                                 config.min_samples_leaf, /*feature_subset=*/0, rng);
      model.trees_.push_back(std::move(tree));
      break;
    }
  }
  return model;
}

// ---------------------------------------------------------------------------

ImportanceReport ImportanceReport::from_accumulated(
    const std::vector<std::string>& variable_names,
    const std::map<std::string, Eigen::ArrayXd>& per_activity_raw) {
  const Eigen::Index v_count = static_cast<Eigen::Index>(variable_names.size());
  if (per_activity_raw.empty())
    throw ValidationError("importance report: no activities accumulated");
  ImportanceReport rep;
  for (const auto& [activity, raw] : per_activity_raw) {
    if (raw.size() != v_count)
      throw ValidationError("importance vector length does not match variable list");
    rep.activities.push_back(activity);
  }
  Eigen::MatrixXd values(static_cast<Eigen::Index>(rep.activities.size()), v_count);
  for (Eigen::Index a = 0; a < values.rows(); ++a) {
    Eigen::ArrayXd row = per_activity_raw.at(rep.activities[static_cast<std::size_t>(a)]);
    const double mx = row.maxCoeff();
    if (mx > 0) row /= mx;  // row-normalized to maximum 1
    values.row(a) = row.transpose();
  }
  // Order variables by descending mean importance (ties by name).
  Eigen::ArrayXd mean = values.colwise().mean().transpose().array();
  std::vector<int> order(static_cast<std::size_t>(v_count));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (mean[a] != mean[b]) return mean[a] > mean[b];
    return variable_names[static_cast<std::size_t>(a)] < variable_names[static_cast<std::size_t>(b)];
  });
  rep.values.resize(values.rows(), v_count);
  for (Eigen::Index c = 0; c < v_count; ++c) {
    rep.variables.push_back(variable_names[static_cast<std::size_t>(order[static_cast<std::size_t>(c)])]);
    rep.values.col(c) = values.col(order[static_cast<std::size_t>(c)]);
  }
  return rep;
}

ImportanceReport variable_importance(const TreeEnsembleModel& model) {
  const int v_count = model.schema().size();
  std::map<std::string, Eigen::ArrayXd> per_class;
  for (const auto& label : model.class_order())
    per_class[label] = Eigen::ArrayXd::Zero(v_count);
  for (const auto& tree : model.trees()) {
    for (const auto& node : tree.nodes) {
      if (node.is_leaf()) continue;
      const int var = model.columns()[static_cast<std::size_t>(node.feature)].variable;
      if (tree.class_index >= 0) {
        per_class[model.class_order()[static_cast<std::size_t>(tree.class_index)]][var] +=
            node.gain;
      } else {
        for (auto& [label, arr] : per_class) arr[var] += node.gain;
      }
    }
  }
  std::vector<std::string> names;
  for (int v = 0; v < v_count; ++v) names.push_back(model.schema().at(v).name);
  return ImportanceReport::from_accumulated(names, per_class);
}

// ---------------------------------------------------------------------------

nlohmann::json TreeEnsembleModel::to_json() const {
  nlohmann::json cfg = {{"family", to_string(config_.family)},
                        {"rounds", config_.rounds},
                        {"max_depth", config_.max_depth},
                        {"learning_rate", config_.learning_rate},
                        {"min_samples_leaf", config_.min_samples_leaf},
                        {"seed", config_.seed}};
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : columns_) cols.push_back({c.variable, c.target_class});
  nlohmann::json encs = nlohmann::json::object();
  for (const auto& [col, st] : encoders_) encs[std::to_string(col)] = st.to_json();
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : trees_) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& nd : t.nodes) {
      if (nd.is_leaf()) {
        nlohmann::json leaf = nlohmann::json::array();
        for (Eigen::Index i = 0; i < nd.leaf.size(); ++i) leaf.push_back(num_to_json(nd.leaf[i]));
        nodes.push_back({{"leaf", leaf}});
      } else {
        nodes.push_back({{"f", nd.feature},
                         {"t", num_to_json(nd.threshold)},
                         {"ml", nd.missing_left},
                         {"g", nd.gain},
                         {"l", nd.left},
                         {"r", nd.right}});
      }
    }
    trees.push_back({{"class", t.class_index}, {"scale", t.scale}, {"nodes", nodes}});
  }
  return {{"format", "trace2lr.model"}, {"version", 1},
          {"config", cfg},              {"class_order", class_order_},
          {"schema", schema_.to_json()}, {"columns", cols},
          {"encoders", encs},           {"trees", trees},
          {"train_loss", train_loss_}};
}

TreeEnsembleModel TreeEnsembleModel::from_json(const nlohmann::json& j) {
  if (j.value("format", std::string()) != "trace2lr.model")
    throw ValidationError("not a trace2lr model file");
  TreeEnsembleModel m;
  const auto& cfg = j.at("config");
  m.config_.family = scorer_family_from_string(cfg.at("family").get<std::string>());
  m.config_.rounds = cfg.at("rounds").get<int>();
  m.config_.max_depth = cfg.at("max_depth").get<int>();
  m.config_.learning_rate = cfg.at("learning_rate").get<double>();
  m.config_.min_samples_leaf = cfg.at("min_samples_leaf").get<int>();
  m.config_.seed = cfg.at("seed").get<std::uint64_t>();
  m.class_order_ = j.at("class_order").get<std::vector<std::string>>();
  m.schema_ = VariableSchema::from_json(j.at("schema"));
  for (const auto& c : j.at("columns"))
    m.columns_.push_back({c.at(0).get<int>(), c.at(1).get<int>()});
  for (auto it = j.at("encoders").begin(); it != j.at("encoders").end(); ++it)
    m.encoders_[std::stoi(it.key())] = CategoryEncoderState::from_json(it.value());
  for (const auto& tj : j.at("trees")) {
    Tree t;
    t.class_index = tj.at("class").get<int>();
    t.scale = tj.at("scale").get<double>();
    for (const auto& nj : tj.at("nodes")) {
      TreeNode nd;
      if (nj.contains("leaf")) {
        const auto& leaf = nj.at("leaf");
        nd.leaf.resize(static_cast<Eigen::Index>(leaf.size()));
        for (std::size_t i = 0; i < leaf.size(); ++i)
          nd.leaf[static_cast<Eigen::Index>(i)] = num_from_json(leaf[i]);
      } else {
        nd.feature = nj.at("f").get<int>();
        nd.threshold = num_from_json(nj.at("t"));
        nd.missing_left = nj.at("ml").get<bool>();
        nd.gain = nj.at("g").get<double>();
        nd.left = nj.at("l").get<std::int32_t>();
        nd.right = nj.at("r").get<std::int32_t>();
      }
      t.nodes.push_back(std::move(nd));
    }
    m.trees_.push_back(std::move(t));
  }
  m.train_loss_ = j.value("train_loss", std::vector<double>());
  return m;
}

void TreeEnsembleModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write model file '" + path + "'");
  out << to_json().dump(1) << '\n';
}

TreeEnsembleModel TreeEnsembleModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open model file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("model file '" + path + "': " + e.what());
  }
  return from_json(j);
}

}  // namespace trace2lr
