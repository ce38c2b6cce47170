// src/experiments.cpp

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

#include "trace2lr/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "trace2lr/common.hpp"

namespace trace2lr {

namespace {

constexpr int kMaxRedraws = 100;

std::vector<std::string> distinct_subjects(const LabeledDataset& ds) {
  std::set<std::string> subjects;
  for (const auto& s : ds.samples) subjects.insert(s.prov.subject);
  return {subjects.begin(), subjects.end()};
}

std::string pair_tag(const std::string& a, const std::string& b) { return a + "\x1f" + b; }

}  // namespace

CvPlan subjectwise_folds(const LabeledDataset& dataset, int n_folds, std::uint64_t seed) {
  std::vector<std::string> subjects = distinct_subjects(dataset);
  if (n_folds < 1) throw ValidationError("subjectwise_folds: need at least one fold");
  if (static_cast<int>(subjects.size()) < n_folds)
    throw ValidationError("subjectwise_folds: " + std::to_string(subjects.size()) +
                          " subjects cannot fill " + std::to_string(n_folds) + " folds");
  std::mt19937_64 rng(derive_seed(seed, "subjectwise-folds"));
  fisher_yates_shuffle(subjects, rng);

  std::vector<std::vector<std::string>> groups(static_cast<std::size_t>(n_folds));
  for (std::size_t i = 0; i < subjects.size(); ++i)
    groups[i % static_cast<std::size_t>(n_folds)].push_back(subjects[i]);

  CvPlan plan;
  for (int f = 0; f < n_folds; ++f) {
    CvFold fold;
    fold.validation_subjects = groups[static_cast<std::size_t>(f)];
    for (int g = 0; g < n_folds; ++g)
      if (g != f)
        fold.train_subjects.insert(fold.train_subjects.end(),
                                   groups[static_cast<std::size_t>(g)].begin(),
                                   groups[static_cast<std::size_t>(g)].end());
    std::sort(fold.train_subjects.begin(), fold.train_subjects.end());
    std::sort(fold.validation_subjects.begin(), fold.validation_subjects.end());
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

BootstrapResult multilevel_bootstrap(const std::vector<FactorTag>& rows,
                                     const BootstrapMetric& metric, const BootstrapPlan& plan) {
  if (rows.empty()) throw ValidationError("multilevel_bootstrap: no rows");
  if (plan.replicates < 1) throw ValidationError("multilevel_bootstrap: replicates must be >= 1");
  std::vector<std::string> phones, locations;
  {
    std::set<std::string> p, l;
    for (const auto& r : rows) {
      p.insert(r.phone);
      l.insert(r.location);
    }
    phones.assign(p.begin(), p.end());
    locations.assign(l.begin(), l.end());
  }

  BootstrapResult res;
  res.replicates.resize(plan.replicates);
  for (int rep = 0; rep < plan.replicates; ++rep) {
    std::mt19937_64 rng(derive_seed(plan.seed, "bootstrap-replicate-" + std::to_string(rep)));
    std::optional<double> value;
    int attempts = 0;
    while (!value.has_value()) {
      if (attempts++ > kMaxRedraws)
        throw ValidationError("multilevel_bootstrap: replicate " + std::to_string(rep) +
                              " found no usable selection after " +
                              std::to_string(kMaxRedraws) + " redraws");
      std::map<std::string, int> phone_mult, loc_mult;
      for (std::size_t d = 0; d < phones.size(); ++d)
        ++phone_mult[phones[bounded_rand(rng, phones.size())]];
      for (std::size_t d = 0; d < locations.size(); ++d)
        ++loc_mult[locations[bounded_rand(rng, locations.size())]];
      std::vector<int> selection;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto pit = phone_mult.find(rows[i].phone);
        const auto lit = loc_mult.find(rows[i].location);
        if (pit == phone_mult.end() || lit == loc_mult.end()) continue;
        const int mult = pit->second * lit->second;
        for (int m = 0; m < mult; ++m) selection.push_back(static_cast<int>(i));
      }
      if (selection.empty()) continue;
      value = metric(selection);
    }
    res.replicates[rep] = *value;
  }
  res.mean = res.replicates.mean();
  return res;
}

int resolve_threads(int requested) {
  int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (const char* env = std::getenv("TRACE2LR_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) n = std::min(n, cap);
  }
  return n;
}

void parallel_for(int n_items, int threads, const std::function<void(int)>& fn) {
  threads = std::min(std::max(threads, 1), std::max(n_items, 1));
  if (threads <= 1) {
    for (int i = 0; i < n_items; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n_items) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------

namespace {

LabeledDataset filter_dataset(const LabeledDataset& ds,
                              const std::function<bool(const MinuteSample&)>& keep) {
  LabeledDataset out;
  out.schema = ds.schema;
  for (const auto& s : ds.samples)
    if (keep(s)) out.samples.push_back(s);
  out.rebuild_vocabulary();
  return out;
}

struct PairFoldResult {
  std::vector<EvalRow> rows;
  Eigen::ArrayXd importance;
};

std::string hypothesis_tag(const std::vector<std::string>& labels) {
  std::string t;
  for (const auto& l : labels) t += l + "+";
  return t;
}

/// Fits one binary LR system on the fold's training subjects and evaluates
/// the fold's validation subjects. Empty result when the fold cannot support
/// the pair (missing class, too few samples). Hypotheses may be label sets.
std::optional<PairFoldResult> eval_pair_fold(const LabeledDataset& dataset,
                                             const std::vector<std::string>& h1_labels,
                                             const std::vector<std::string>& h2_labels,
                                             const CvFold& fold, const ExperimentPlan& plan,
                                             int fold_index, bool collect_importance,
                                             const std::function<bool(const MinuteSample&, bool)>&
                                                 extra_filter = nullptr) {
  std::set<std::string> train_set(fold.train_subjects.begin(), fold.train_subjects.end());
  std::set<std::string> val_set(fold.validation_subjects.begin(),
                                fold.validation_subjects.end());
  std::set<std::string> h1(h1_labels.begin(), h1_labels.end());
  std::set<std::string> h2(h2_labels.begin(), h2_labels.end());
  auto in_pair = [&](const MinuteSample& s) { return h1.count(s.label) || h2.count(s.label); };
  LabeledDataset train = filter_dataset(dataset, [&](const MinuteSample& s) {
    return in_pair(s) && train_set.count(s.prov.subject) &&
           (!extra_filter || extra_filter(s, true));
  });
  LabeledDataset val = filter_dataset(dataset, [&](const MinuteSample& s) {
    return in_pair(s) && val_set.count(s.prov.subject) && (!extra_filter || extra_filter(s, false));
  });
  if (train.samples.empty() || val.samples.empty()) return std::nullopt;

  ScorerConfig cfg = plan.scorer;
  cfg.seed = derive_seed(plan.seed, "pair:" + pair_tag(hypothesis_tag(h1_labels),
                                                       hypothesis_tag(h2_labels)) +
                                        ":fold:" + std::to_string(fold_index));
  LrSystem sys;
  try {
    sys = fit_lr_system(train, h1_labels, h2_labels, cfg, plan.calibrator);
  } catch (const ValidationError&) {
    return std::nullopt;  // fold cannot support this pair (degenerate classes)
  }

  PairFoldResult out;
  for (const auto& s : val.samples) {
    EvalRow row;
    const Eigen::ArrayXd raw = sys.model.score(s);
    row.score = raw[0] - raw[1];
    const double p = calibrator_posterior(sys.calibrator, row.score);
    row.llr = std::log(apply_bounds(posterior_to_lr(p, sys.prior_odds), sys.bounds));
    row.label = h1.count(s.label) ? 1 : 0;
    Eigen::Index pred;
    raw.maxCoeff(&pred);
    row.correct = (pred == 0) == (row.label == 1);
    row.phone = s.prov.phone;
    row.location = s.prov.location;
    out.rows.push_back(std::move(row));
  }
  if (collect_importance) out.importance = sys.model.importance_raw();
  return out;
}

std::optional<double> cllr_of_selection(const std::vector<EvalRow>& rows,
                                        const std::vector<int>& idx) {
  BinaryEvalSet set;
  set.llr.resize(static_cast<Eigen::Index>(idx.size()));
  set.label.resize(static_cast<Eigen::Index>(idx.size()));
  int n1 = 0, n2 = 0;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const EvalRow& r = rows[static_cast<std::size_t>(idx[i])];
    set.llr[static_cast<Eigen::Index>(i)] = r.llr;
    set.label[static_cast<Eigen::Index>(i)] = r.label;
    (r.label == 1 ? n1 : n2) += 1;
  }
  if (n1 == 0 || n2 == 0) return std::nullopt;
  return cllr(set);
}

std::optional<double> cllr_min_of_selection(const std::vector<EvalRow>& rows,
                                            const std::vector<int>& idx) {
  BinaryEvalSet set;
  Eigen::ArrayXd scores(static_cast<Eigen::Index>(idx.size()));
  set.llr.resize(static_cast<Eigen::Index>(idx.size()));
  set.label.resize(static_cast<Eigen::Index>(idx.size()));
  int n1 = 0, n2 = 0;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const EvalRow& r = rows[static_cast<std::size_t>(idx[i])];
    set.llr[static_cast<Eigen::Index>(i)] = r.llr;
    set.label[static_cast<Eigen::Index>(i)] = r.label;
    scores[static_cast<Eigen::Index>(i)] = r.score;
    (r.label == 1 ? n1 : n2) += 1;
  }
  if (n1 == 0 || n2 == 0) return std::nullopt;
  return pav_cllr_min(set, scores);
}

std::vector<FactorTag> tags_of(const std::vector<EvalRow>& rows) {
  std::vector<FactorTag> tags;
  tags.reserve(rows.size());
  for (const auto& r : rows) tags.push_back({r.phone, r.location});
  return tags;
}

/// Pools fold results and reduces them to bootstrap means.
PairOutcome summarize_pair(const std::string& h1, const std::string& h2,
                           std::vector<EvalRow> rows, Eigen::ArrayXd importance,
                           const ExperimentPlan& plan) {
  PairOutcome out;
  out.h1 = h1;
  out.h2 = h2;
  out.importance = std::move(importance);
  out.n_rows = static_cast<int>(rows.size());
  bool has1 = false, has2 = false;
  for (const auto& r : rows) (r.label == 1 ? has1 : has2) = true;
  if (rows.empty() || !has1 || !has2) return out;  // absent cell

  BootstrapPlan bplan = plan.bootstrap;
  bplan.seed = derive_seed(plan.bootstrap.seed, "pair:" + pair_tag(h1, h2));
  const auto tags = tags_of(rows);
  try {
    out.cllr = multilevel_bootstrap(
                   tags, [&](const std::vector<int>& idx) { return cllr_of_selection(rows, idx); },
                   bplan)
                   .mean;
    out.cllr_min =
        multilevel_bootstrap(
            tags, [&](const std::vector<int>& idx) { return cllr_min_of_selection(rows, idx); },
            bplan)
            .mean;
    out.accuracy = multilevel_bootstrap(
                       tags,
                       [&](const std::vector<int>& idx) -> std::optional<double> {
                         double hits = 0;
                         for (int i : idx)
                           hits += rows[static_cast<std::size_t>(i)].correct ? 1.0 : 0.0;
                         return hits / static_cast<double>(idx.size());
                       },
                       bplan)
                       .mean;
    out.present = true;
  } catch (const ValidationError&) {
    // All replicates degenerate: leave the cell absent.
  }
  return out;
}

}  // namespace

PairwiseRun run_pairwise(const LabeledDataset& dataset,
                         const std::vector<std::string>& activities, const ExperimentPlan& plan,
                         const PairwiseOptions& options) {
  if (activities.size() < 2) throw ValidationError("run_pairwise: need at least two activities");
  const int n_subjects = static_cast<int>(distinct_subjects(dataset).size());
  const int n_folds = plan.folds > 0 ? plan.folds : n_subjects;
  const CvPlan cv = subjectwise_folds(dataset, n_folds, plan.seed);

  PairwiseRun run;
  run.activities = activities;
  std::vector<std::pair<int, int>> index;  // (r, c), r > c
  for (std::size_t r = 1; r < activities.size(); ++r)
    for (std::size_t c = 0; c < r; ++c) index.push_back({static_cast<int>(r), static_cast<int>(c)});
  run.pairs.resize(index.size());

  parallel_for(static_cast<int>(index.size()), resolve_threads(plan.threads), [&](int item) {
    const auto [r, c] = index[static_cast<std::size_t>(item)];
    const std::string& h1 = activities[static_cast<std::size_t>(r)];
    const std::string& h2 = activities[static_cast<std::size_t>(c)];
    std::vector<EvalRow> rows;
    Eigen::ArrayXd importance = Eigen::ArrayXd::Zero(dataset.schema.size());
    for (std::size_t f = 0; f < cv.folds.size(); ++f) {
      auto res = eval_pair_fold(dataset, {h1}, {h2}, cv.folds[f], plan, static_cast<int>(f),
                                options.collect_importance);
      if (!res) continue;
      rows.insert(rows.end(), res->rows.begin(), res->rows.end());
      if (options.collect_importance && res->importance.size()) importance += res->importance;
    }
    run.pairs[static_cast<std::size_t>(item)] =
        summarize_pair(h1, h2, std::move(rows),
                       options.collect_importance ? importance : Eigen::ArrayXd(), plan);
  });
  return run;
}

BinaryEvalSet PairEvaluation::eval_set() const {
  BinaryEvalSet set;
  set.llr.resize(static_cast<Eigen::Index>(rows.size()));
  set.label.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    set.llr[static_cast<Eigen::Index>(i)] = rows[i].llr;
    set.label[static_cast<Eigen::Index>(i)] = rows[i].label;
  }
  return set;
}

Eigen::ArrayXd PairEvaluation::scores() const {
  Eigen::ArrayXd s(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) s[static_cast<Eigen::Index>(i)] = rows[i].score;
  return s;
}

PairEvaluation evaluate_pair(const LabeledDataset& dataset,
                             const std::vector<std::string>& h1_labels,
                             const std::vector<std::string>& h2_labels,
                             const ExperimentPlan& plan) {
  const int n_subjects = static_cast<int>(distinct_subjects(dataset).size());
  const int n_folds = plan.folds > 0 ? plan.folds : n_subjects;
  const CvPlan cv = subjectwise_folds(dataset, n_folds, plan.seed);

  PairEvaluation out;
  for (std::size_t f = 0; f < cv.folds.size(); ++f) {
    auto res = eval_pair_fold(dataset, h1_labels, h2_labels, cv.folds[f], plan,
                              static_cast<int>(f), false);
    if (res) out.rows.insert(out.rows.end(), res->rows.begin(), res->rows.end());
  }
  for (const auto& r : out.rows) (r.label == 1 ? out.n1 : out.n2) += 1;
  if (out.rows.empty() || out.n1 == 0 || out.n2 == 0)
    throw ValidationError("evaluate_pair: pooled validation set does not cover both hypotheses");

  out.report = cllr_decompose(out.eval_set(), out.scores());
  BootstrapPlan bplan = plan.bootstrap;
  bplan.seed = derive_seed(plan.bootstrap.seed,
                           "pair:" + pair_tag(hypothesis_tag(h1_labels), hypothesis_tag(h2_labels)));
  const auto tags = tags_of(out.rows);
  out.bootstrap_cllr =
      multilevel_bootstrap(
          tags, [&](const std::vector<int>& idx) { return cllr_of_selection(out.rows, idx); },
          bplan)
          .mean;
  out.bootstrap_cllr_min =
      multilevel_bootstrap(
          tags, [&](const std::vector<int>& idx) { return cllr_min_of_selection(out.rows, idx); },
          bplan)
          .mean;
  return out;
}

PairwiseMatrixReport pairwise_matrix(const PairwiseRun& run) {
  const int k = static_cast<int>(run.activities.size());
  PairwiseMatrixReport rep;
  rep.activities = run.activities;
  rep.cells = Eigen::MatrixXd::Constant(k, k, std::numeric_limits<double>::quiet_NaN());
  std::map<std::string, int> idx;
  for (int i = 0; i < k; ++i) idx[run.activities[static_cast<std::size_t>(i)]] = i;
  for (const auto& p : run.pairs) {
    if (!p.present) continue;
    const int r = idx.at(p.h1), c = idx.at(p.h2);
    rep.cells(r, c) = p.cllr;      // lower triangle (r > c by construction)
    rep.cells(c, r) = p.cllr_min;  // upper triangle
  }
  rep.diagonal.resize(k);
  for (int a = 0; a < k; ++a) {
    double sum = 0;
    int n = 0;
    for (const auto& p : run.pairs) {
      if (!p.present) continue;
      if (idx.at(p.h1) == a || idx.at(p.h2) == a) {
        sum += p.cllr;
        ++n;
      }
    }
    rep.diagonal[a] = n ? sum / n : std::numeric_limits<double>::quiet_NaN();
  }
  return rep;
}

nlohmann::json PairwiseMatrixReport::to_json() const {
  nlohmann::json cells_json = nlohmann::json::array();
  const int k = static_cast<int>(activities.size());
  for (int r = 0; r < k; ++r) {
    for (int c = 0; c < k; ++c) {
      if (r == c || std::isnan(cells(r, c))) continue;
      cells_json.push_back({{"h1", activities[static_cast<std::size_t>(std::max(r, c))]},
                            {"h2", activities[static_cast<std::size_t>(std::min(r, c))]},
                            {"metric", r > c ? "cllr" : "cllr_min"},
                            {"value", cells(r, c)}});
    }
  }
  nlohmann::json diag = nlohmann::json::array();
  for (int a = 0; a < k; ++a) {
    diag.push_back({{"activity", activities[static_cast<std::size_t>(a)]},
                    {"mean_cllr", std::isnan(diagonal[a]) ? nlohmann::json() :
                                                            nlohmann::json(diagonal[a])}});
  }
  return {{"activities", activities}, {"cells", cells_json}, {"diagonal", diag}};
}

std::vector<AblationRow> ablation_sweep(const LabeledDataset& dataset,
                                        const std::vector<std::string>& activities,
                                        const std::vector<ScorerFamily>& families,
                                        const std::vector<CalibratorKind>& calibrators,
                                        const ExperimentPlan& plan) {
  if (families.empty() || calibrators.empty())
    throw ValidationError("ablation_sweep: need at least one family and one calibrator");
  std::vector<AblationRow> table;
  for (ScorerFamily family : families) {
    for (CalibratorKind calibrator : calibrators) {
      ExperimentPlan sub = plan;
      sub.scorer = family == plan.scorer.family ? plan.scorer : ScorerConfig::defaults_for(family);
      sub.scorer.seed = plan.scorer.seed;
      sub.calibrator = calibrator;
      const PairwiseRun run = run_pairwise(dataset, activities, sub);
      AblationRow row;
      row.family = family;
      row.calibrator = calibrator;
      double acc = 0, cl = 0;
      int n = 0;
      std::array<int, 4> below{};
      for (const auto& p : run.pairs) {
        if (!p.present) continue;
        ++n;
        acc += p.accuracy;
        cl += p.cllr;
        for (std::size_t t = 0; t < kAblationThresholds.size(); ++t)
          if (p.cllr < kAblationThresholds[t]) ++below[t];
      }
      row.n_pairs = n;
      if (n > 0) {
        row.accuracy = 100.0 * acc / n;
        row.mean_cllr = cl / n;
        for (std::size_t t = 0; t < below.size(); ++t)
          row.pct_below[t] = 100.0 * below[t] / n;
      }
      table.push_back(row);
    }
  }
  return table;
}

// ---------------------------------------------------------------------------

const char* to_string(Factor f) { return f == Factor::phone ? "phone" : "location"; }

Factor factor_from_string(const std::string& s) {
  if (s == "phone" || s == "phone_model") return Factor::phone;
  if (s == "location" || s == "carry_location") return Factor::location;
  throw ValidationError("unknown factor '" + s + "' (expected phone or location)");
}

namespace {

const std::string& factor_of(const MinuteSample& s, Factor f) {
  return f == Factor::phone ? s.prov.phone : s.prov.location;
}

/// Deterministic size-matched random subset of {0..n-1}.
std::set<int> random_subset(int n, int keep, std::mt19937_64& rng) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  fisher_yates_shuffle(idx, rng);
  return {idx.begin(), idx.begin() + keep};
}

std::optional<double> pooled_cllr(const std::vector<EvalRow>& rows, const ExperimentPlan& plan,
                                  const std::string& tag) {
  bool has1 = false, has2 = false;
  for (const auto& r : rows) (r.label == 1 ? has1 : has2) = true;
  if (rows.empty() || !has1 || !has2) return std::nullopt;
  BootstrapPlan bplan = plan.bootstrap;
  bplan.seed = derive_seed(plan.bootstrap.seed, tag);
  try {
    return multilevel_bootstrap(
               tags_of(rows),
               [&](const std::vector<int>& idx) { return cllr_of_selection(rows, idx); }, bplan)
        .mean;
  } catch (const ValidationError&) {
    return std::nullopt;
  }
}

}  // namespace

FactorSplit leave_factor_split(const LabeledDataset& dataset, const CvFold& fold,
                               const std::string& h1, const std::string& h2, Factor factor,
                               const std::string& level) {
  std::set<std::string> train_set(fold.train_subjects.begin(), fold.train_subjects.end());
  std::set<std::string> val_set(fold.validation_subjects.begin(),
                                fold.validation_subjects.end());
  FactorSplit split;
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const auto& s = dataset.samples[i];
    if (s.label != h1 && s.label != h2) continue;
    if (train_set.count(s.prov.subject) && factor_of(s, factor) != level)
      split.train_rows.push_back(static_cast<int>(i));
    if (val_set.count(s.prov.subject) && factor_of(s, factor) == level)
      split.validation_rows.push_back(static_cast<int>(i));
  }
  return split;
}

SensitivityReport sensitivity_leave_factor(const LabeledDataset& dataset,
                                           const std::vector<std::string>& activities,
                                           Factor factor, const ExperimentPlan& plan) {
  std::set<std::string> level_set;
  for (const auto& s : dataset.samples) level_set.insert(factor_of(s, factor));
  if (level_set.size() < 2)
    throw ValidationError("sensitivity_leave_factor: need at least two levels of the factor");
  const std::vector<std::string> levels(level_set.begin(), level_set.end());

  const int n_subjects = static_cast<int>(distinct_subjects(dataset).size());
  const int n_folds = plan.folds > 0 ? plan.folds : n_subjects;
  const CvPlan cv = subjectwise_folds(dataset, n_folds, plan.seed);

  std::vector<std::pair<int, int>> pair_index;
  for (std::size_t r = 1; r < activities.size(); ++r)
    for (std::size_t c = 0; c < r; ++c)
      pair_index.push_back({static_cast<int>(r), static_cast<int>(c)});

  struct Item {
    int pair = 0;
    int level = 0;
  };
  std::vector<Item> items;
  for (std::size_t p = 0; p < pair_index.size(); ++p)
    for (std::size_t l = 0; l < levels.size(); ++l)
      items.push_back({static_cast<int>(p), static_cast<int>(l)});

  std::vector<std::optional<SensitivityObservation>> results(items.size());
  std::vector<std::string> warnings(items.size());

  parallel_for(static_cast<int>(items.size()), resolve_threads(plan.threads), [&](int it) {
    const Item item = items[static_cast<std::size_t>(it)];
    const auto [r, c] = pair_index[static_cast<std::size_t>(item.pair)];
    const std::string& h1 = activities[static_cast<std::size_t>(r)];
    const std::string& h2 = activities[static_cast<std::size_t>(c)];
    const std::string& level = levels[static_cast<std::size_t>(item.level)];
    const std::string tag = "sensitivity:" + pair_tag(h1, h2) + ":" + level;

    // Separated: the level never trains, only validates.
    std::vector<EvalRow> sep_rows;
    std::vector<std::pair<int, int>> fold_sizes;  // (train kept, val kept) per fold
    for (std::size_t f = 0; f < cv.folds.size(); ++f) {
      const FactorSplit split = leave_factor_split(dataset, cv.folds[f], h1, h2, factor, level);
      fold_sizes.push_back({static_cast<int>(split.train_rows.size()),
                            static_cast<int>(split.validation_rows.size())});
      std::set<const MinuteSample*> keep_train, keep_val;
      for (int row : split.train_rows)
        keep_train.insert(&dataset.samples[static_cast<std::size_t>(row)]);
      for (int row : split.validation_rows)
        keep_val.insert(&dataset.samples[static_cast<std::size_t>(row)]);
      auto res = eval_pair_fold(dataset, {h1}, {h2}, cv.folds[f], plan, static_cast<int>(f), false,
                                [&](const MinuteSample& s, bool is_train) {
                                  return (is_train ? keep_train : keep_val).count(&s) > 0;
                                });
      if (res) sep_rows.insert(sep_rows.end(), res->rows.begin(), res->rows.end());
    }
    const auto cllr_sep = pooled_cllr(sep_rows, plan, tag + ":separated");
    if (!cllr_sep.has_value()) {
      warnings[static_cast<std::size_t>(it)] =
          "level '" + level + "' skipped for (" + h1 + ", " + h2 +
          "): no usable validation data with that level";
      return;
    }

    // Control: random removal matching the separated sizes, factors mixed.
    std::vector<EvalRow> ctrl_rows;
    for (std::size_t f = 0; f < cv.folds.size(); ++f) {
      std::mt19937_64 rng(
          derive_seed(plan.seed, tag + ":control-fold:" + std::to_string(f)));
      // Enumerate candidate rows in dataset order for determinism.
      std::set<std::string> train_set(cv.folds[f].train_subjects.begin(),
                                      cv.folds[f].train_subjects.end());
      std::set<std::string> val_set(cv.folds[f].validation_subjects.begin(),
                                    cv.folds[f].validation_subjects.end());
      std::vector<int> train_rows, val_rows;
      for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        const auto& s = dataset.samples[i];
        if (s.label != h1 && s.label != h2) continue;
        if (train_set.count(s.prov.subject)) train_rows.push_back(static_cast<int>(i));
        if (val_set.count(s.prov.subject)) val_rows.push_back(static_cast<int>(i));
      }
      const auto [want_train, want_val] = fold_sizes[f];
      if (want_train <= 0 || want_val <= 0) continue;
      std::set<int> keep_train_pos =
          random_subset(static_cast<int>(train_rows.size()),
                        std::min<int>(want_train, static_cast<int>(train_rows.size())), rng);
      std::set<int> keep_val_pos =
          random_subset(static_cast<int>(val_rows.size()),
                        std::min<int>(want_val, static_cast<int>(val_rows.size())), rng);
      std::set<int> keep_rows;
      {
        int pos = 0;
        for (int row : train_rows) {
          if (keep_train_pos.count(pos)) keep_rows.insert(row);
          ++pos;
        }
        pos = 0;
        for (int row : val_rows) {
          if (keep_val_pos.count(pos)) keep_rows.insert(row);
          ++pos;
        }
      }
      std::map<const MinuteSample*, bool> in_keep;
      for (int row : keep_rows)
        in_keep[&dataset.samples[static_cast<std::size_t>(row)]] = true;
      auto res = eval_pair_fold(dataset, {h1}, {h2}, cv.folds[f], plan, static_cast<int>(f), false,
                                [&](const MinuteSample& s, bool) {
                                  return in_keep.count(&s) > 0;
                                });
      if (res) ctrl_rows.insert(ctrl_rows.end(), res->rows.begin(), res->rows.end());
    }
    const auto cllr_ctrl = pooled_cllr(ctrl_rows, plan, tag + ":control");
    if (!cllr_ctrl.has_value()) {
      warnings[static_cast<std::size_t>(it)] =
          "control for level '" + level + "' degenerate for (" + h1 + ", " + h2 + ")";
      return;
    }

    SensitivityObservation obs;
    obs.h1 = h1;
    obs.h2 = h2;
    obs.level = level;
    obs.cllr_separated = *cllr_sep;
    obs.cllr_control = *cllr_ctrl;
    obs.delta = obs.cllr_separated - obs.cllr_control;
    results[static_cast<std::size_t>(it)] = obs;
  });

  SensitivityReport rep;
  rep.factor = factor;
  for (const auto& w : warnings)
    if (!w.empty()) rep.warnings.push_back(w);
  for (const auto& r : results)
    if (r.has_value()) rep.observations.push_back(*r);
  if (rep.observations.empty())
    throw ValidationError("sensitivity_leave_factor: no usable (pair, level) combinations");

  std::vector<double> all_deltas;
  for (const auto& level : levels) {
    SensitivityLevel lv;
    lv.level = level;
    std::vector<double> deltas;
    for (const auto& o : rep.observations)
      if (o.level == level) deltas.push_back(o.delta);
    lv.n_pairs = static_cast<int>(deltas.size());
    if (!deltas.empty()) {
      double sum = 0;
      for (double d : deltas) sum += d;
      lv.mean_delta = sum / static_cast<double>(deltas.size());
      lv.test = wilcoxon_signed_rank_greater(deltas);
    }
    rep.levels.push_back(std::move(lv));
    for (const auto& o : rep.observations)
      if (o.level == level) all_deltas.push_back(o.delta);
  }
  double sum = 0;
  for (double d : all_deltas) sum += d;
  rep.mean_delta = all_deltas.empty() ? 0.0 : sum / static_cast<double>(all_deltas.size());
  rep.overall = wilcoxon_signed_rank_greater(all_deltas);
  return rep;
}

nlohmann::json SensitivityReport::to_json() const {
  nlohmann::json obs = nlohmann::json::array();
  for (const auto& o : observations) {
    obs.push_back({{"h1", o.h1},
                   {"h2", o.h2},
                   {"level", o.level},
                   {"cllr_separated", o.cllr_separated},
                   {"cllr_control", o.cllr_control},
                   {"delta", o.delta}});
  }
  nlohmann::json lvl = nlohmann::json::array();
  for (const auto& l : levels) {
    lvl.push_back({{"level", l.level},
                   {"n_pairs", l.n_pairs},
                   {"mean_delta", l.mean_delta},
                   {"wilcoxon_statistic", l.test.statistic},
                   {"p_value", l.test.p_value},
                   {"exact", l.test.exact}});
  }
  return {{"factor", std::string(to_string(factor))},
          {"observations", obs},
          {"levels", lvl},
          {"mean_delta", mean_delta},
          {"overall_p_value", overall.p_value},
          {"overall_statistic", overall.statistic},
          {"warnings", warnings}};
}

// ---------------------------------------------------------------------------

void ActivityGrouping::validate() const {
  std::set<std::string> seen_groups, seen_activities;
  for (const auto& [name, acts] : groups) {
    if (name.empty()) throw ValidationError("activity grouping: empty group name");
    if (!seen_groups.insert(name).second)
      throw ValidationError("activity grouping: duplicate group '" + name + "'");
    for (const auto& a : acts)
      if (!seen_activities.insert(a).second)
        throw ValidationError("activity grouping: activity '" + a +
                              "' appears in more than one group");
  }
}

std::optional<std::string> ActivityGrouping::group_of(const std::string& activity) const {
  for (const auto& [name, acts] : groups)
    if (std::find(acts.begin(), acts.end(), activity) != acts.end()) return name;
  return std::nullopt;
}

std::vector<std::string> ActivityGrouping::group_names() const {
  std::vector<std::string> names;
  for (const auto& [name, acts] : groups) names.push_back(name);
  return names;
}

ActivityGrouping ActivityGrouping::from_json(const nlohmann::json& j) {
  ActivityGrouping g;
  for (auto it = j.begin(); it != j.end(); ++it)
    g.groups.push_back({it.key(), it.value().get<std::vector<std::string>>()});
  std::sort(g.groups.begin(), g.groups.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  g.validate();
  return g;
}

nlohmann::json ActivityGrouping::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, acts] : groups) j[name] = acts;
  return j;
}

ActivityGrouping default_expert_grouping() {
  ActivityGrouping g;
  g.groups = {
      {"dynamic", {"dragging", "kicking", "punching", "throwing"}},
      {"elevation",
       {"elevator_down", "elevator_up", "escalator_down", "escalator_up", "stairs_down",
        "stairs_up"}},
      {"movement", {"cycling", "running", "walking"}},
      {"stationary", {"sitting", "standing"}},
      {"transport", {"bus", "car", "train", "tram"}},
  };
  return g;
}

LabeledDataset relabel_by_groups(const LabeledDataset& dataset, const ActivityGrouping& grouping,
                                 const std::vector<std::string>& subset) {
  grouping.validate();
  std::set<std::string> wanted(subset.begin(), subset.end());
  LabeledDataset out;
  out.schema = dataset.schema;
  for (const auto& s : dataset.samples) {
    const auto g = grouping.group_of(s.label);
    if (!g.has_value() || (!wanted.empty() && !wanted.count(*g))) continue;
    MinuteSample copy = s;
    copy.label = *g;
    out.samples.push_back(std::move(copy));
  }
  out.rebuild_vocabulary();
  return out;
}

GroupSweepRow evaluate_group_subset(const LabeledDataset& dataset,
                                  const ActivityGrouping& grouping,
                                  const std::vector<std::string>& subset,
                                  const ExperimentPlan& plan) {
  grouping.validate();
  const int n_subjects = static_cast<int>(distinct_subjects(dataset).size());
  const int n_folds = plan.folds > 0 ? plan.folds : n_subjects;
  GroupSweepRow out;
  out.groups = subset;
  const LabeledDataset grouped = relabel_by_groups(dataset, grouping, subset);
  std::set<std::string> present_labels(grouped.vocabulary.begin(), grouped.vocabulary.end());
  if (present_labels.size() < 2) return out;  // subset leaves < 2 groups with data

  std::string subset_tag = "groups:";
  for (const auto& g : subset) subset_tag += g + ",";

  CvPlan cv;
  try {
    cv = subjectwise_folds(grouped, std::min(n_folds,
                                             static_cast<int>(distinct_subjects(grouped).size())),
                           plan.seed);
  } catch (const ValidationError&) {
    return out;
  }

  // Only groups that actually have data enter the class list.
  std::vector<std::string> classes;
  for (const auto& g : subset)
    if (present_labels.count(g)) classes.push_back(g);

  struct LoglikRow {
    Eigen::ArrayXd loglik;
    int label;
    FactorTag tag;
  };
  std::vector<LoglikRow> pooled;
  for (std::size_t f = 0; f < cv.folds.size(); ++f) {
    std::set<std::string> train_set(cv.folds[f].train_subjects.begin(),
                                    cv.folds[f].train_subjects.end());
    std::set<std::string> val_set(cv.folds[f].validation_subjects.begin(),
                                  cv.folds[f].validation_subjects.end());
    LabeledDataset train = filter_dataset(
        grouped, [&](const MinuteSample& s) { return train_set.count(s.prov.subject) > 0; });
    LabeledDataset val = filter_dataset(
        grouped, [&](const MinuteSample& s) { return val_set.count(s.prov.subject) > 0; });
    if (train.samples.empty() || val.samples.empty()) continue;

    ScorerConfig cfg = plan.scorer;
    cfg.seed = derive_seed(plan.seed, subset_tag + ":fold:" + std::to_string(f));
    TreeEnsembleModel model;
    try {
      std::vector<std::string> labels;
      for (const auto& s : train.samples) labels.push_back(s.label);
      model = fit_scorer(train, classes, cfg, compute_class_weights(labels, classes));
    } catch (const ValidationError&) {
      continue;
    }
    for (const auto& s : val.samples) {
      const Eigen::ArrayXd raw = model.score(s);
      const double lse = logsumexp<double>(raw);
      LoglikRow row;
      row.loglik = raw - lse;  // log softmax
      row.label = static_cast<int>(
          std::find(classes.begin(), classes.end(), s.label) - classes.begin());
      row.tag = {s.prov.phone, s.prov.location};
      pooled.push_back(std::move(row));
    }
  }
  out.n_rows = static_cast<int>(pooled.size());
  if (pooled.empty()) return out;

  const int k = static_cast<int>(classes.size());
  BootstrapPlan bplan = plan.bootstrap;
  bplan.seed = derive_seed(plan.bootstrap.seed, subset_tag);
  std::vector<FactorTag> tags;
  for (const auto& r : pooled) tags.push_back(r.tag);
  try {
    out.cmxe_norm =
        multilevel_bootstrap(
            tags,
            [&](const std::vector<int>& idx) -> std::optional<double> {
              MulticlassEvalSet set;
              set.loglik.resize(static_cast<Eigen::Index>(idx.size()), k);
              set.label.resize(static_cast<Eigen::Index>(idx.size()));
              std::vector<int> counts(static_cast<std::size_t>(k), 0);
              for (std::size_t i = 0; i < idx.size(); ++i) {
                const auto& r = pooled[static_cast<std::size_t>(idx[i])];
                set.loglik.row(static_cast<Eigen::Index>(i)) = r.loglik.transpose();
                set.label[static_cast<Eigen::Index>(i)] = r.label;
                ++counts[static_cast<std::size_t>(r.label)];
              }
              for (int cnt : counts)
                if (cnt == 0) return std::nullopt;
              return cmxe(set).normalized;
            },
            bplan)
            .mean;
    out.present = true;
  } catch (const ValidationError&) {
  // leave absent
  }
  return out;
}

std::vector<GroupSweepRow> group_sweep(const LabeledDataset& dataset,
                                       const ActivityGrouping& grouping,
                                       const ExperimentPlan& plan) {
  grouping.validate();
  const std::vector<std::string> names = grouping.group_names();
  const int g_count = static_cast<int>(names.size());
  if (g_count < 2) throw ValidationError("group_sweep: need at least two groups");

  std::vector<std::vector<std::string>> subsets;
  for (unsigned mask = 0; mask < (1u << g_count); ++mask) {
    if (__builtin_popcount(mask) < 2) continue;
    std::vector<std::string> subset;
    for (int g = 0; g < g_count; ++g)
      if (mask & (1u << g)) subset.push_back(names[static_cast<std::size_t>(g)]);
    subsets.push_back(std::move(subset));
  }
  std::stable_sort(subsets.begin(), subsets.end(),
                   [](const auto& a, const auto& b) { return a.size() < b.size(); });

  std::vector<GroupSweepRow> rows(subsets.size());
  parallel_for(static_cast<int>(subsets.size()), resolve_threads(plan.threads), [&](int item) {
    rows[static_cast<std::size_t>(item)] =
        evaluate_group_subset(dataset, grouping, subsets[static_cast<std::size_t>(item)], plan);
  });
  return rows;
}

// ---------------------------------------------------------------------------

int Timeline::correct_count() const {
  int n = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i)
    if (truth[i] >= 0 && predicted[i] == truth[i]) ++n;
  return n;
}

int Timeline::labeled_count() const {
  int n = 0;
  for (int t : truth)
    if (t >= 0) ++n;
  return n;
}

Timeline build_timeline(const TreeEnsembleModel& model, const std::vector<MinuteSample>& samples,
                        const ActivityGrouping& grouping) {
  grouping.validate();
  Timeline tl;
  tl.class_order = model.class_order();
  tl.likelihoods.resize(static_cast<Eigen::Index>(samples.size()),
                        static_cast<Eigen::Index>(tl.class_order.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Eigen::ArrayXd lik = multiclass_likelihoods(model, samples[i]);
    tl.likelihoods.row(static_cast<Eigen::Index>(i)) = lik.transpose();
    Eigen::Index arg = 0;
    lik.maxCoeff(&arg);  // ties resolve to the first class in class_order
    tl.minutes.push_back(samples[i].minute);
    tl.predicted.push_back(static_cast<int>(arg));
    int truth = -1;
    const auto g = grouping.group_of(samples[i].label);
    if (!g.has_value() && std::find(tl.class_order.begin(), tl.class_order.end(),
                                    samples[i].label) != tl.class_order.end()) {
      // Sample already labeled at group level.
      truth = static_cast<int>(std::find(tl.class_order.begin(), tl.class_order.end(),
                                         samples[i].label) -
                               tl.class_order.begin());
    } else if (g.has_value()) {
      const auto it = std::find(tl.class_order.begin(), tl.class_order.end(), *g);
      if (it != tl.class_order.end())
        truth = static_cast<int>(it - tl.class_order.begin());
    }
    tl.truth.push_back(truth);
  }
  return tl;
}

}  // namespace trace2lr
