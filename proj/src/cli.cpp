// src/cli.cpp

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

#include "trace2lr/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "trace2lr/calibration.hpp"
#include "trace2lr/common.hpp"
#include "trace2lr/config.hpp"
#include "trace2lr/csv.hpp"
#include "trace2lr/experiments.hpp"
#include "trace2lr/ingest.hpp"
#include "trace2lr/metrics.hpp"
#include "trace2lr/svg.hpp"

namespace trace2lr {

namespace {


std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : csv) {
    if (c == ',') {
      if (!trim(cur).empty()) out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty()) out.push_back(trim(cur));
  return out;
}

void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ValidationError("cannot create output directory '" + dir + "'");
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << content;
}

void write_json(const std::string& path, const nlohmann::json& j) {
  write_text(path, j.dump(1) + "\n");
}

const char* curve_kind_name(CurveKind k) {
  switch (k) {
    case CurveKind::pav:
      return "pav";
    case CurveKind::tippett:
      return "tippett";
    case CurveKind::ece:
      return "ece";
  }
  return "curve";
}

void write_curve_csv(const std::string& path, const CurveData& curve) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  write_csv_row(out, {"kind", "series", "x", "y"});
  for (const auto& s : curve.series)
    for (const auto& p : s.points)
      write_csv_row(out, {curve_kind_name(curve.kind), s.name, format_double(p[0]),
                          format_double(p[1])});
}

struct LoadedData {
  VariableSchema schema;
  LabeledDataset dataset;
  std::vector<std::string> activities;
};

LoadedData load_data(const ExperimentConfig& cfg) {
  if (cfg.schema_path.empty()) throw ValidationError("config: 'schema' path is required");
  if (cfg.dataset.empty()) throw ValidationError("config: 'dataset' path is required");
  LoadedData d;
  d.schema = VariableSchema::from_json_file(cfg.schema_path);
  d.dataset = read_dataset_csv_file(cfg.dataset, d.schema);
  d.activities = cfg.activities.empty() ? d.dataset.vocabulary : cfg.activities;
  if (d.activities.size() < 2)
    throw ValidationError("need at least two activities (config 'activities' or dataset labels)");
  return d;
}

std::string join(const std::vector<std::string>& v, const std::string& sep) {
  std::string out;
  for (const auto& s : v) {
    if (!out.empty()) out += sep;
    out += s;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Verbs
// ---------------------------------------------------------------------------

int cmd_ingest(const ExperimentConfig& cfg) {
  if (cfg.ingest.registrations.empty() || cfg.ingest.intervals.empty())
    throw ValidationError("config: ingest.registrations and ingest.intervals are required");
  if (cfg.schema_path.empty()) throw ValidationError("config: 'schema' path is required");
  const VariableSchema schema = VariableSchema::from_json_file(cfg.schema_path);
  const auto regs = load_registrations(cfg.ingest.registrations, schema, cfg.ingest.columns);
  const auto intervals = load_intervals(cfg.ingest.intervals, cfg.ingest.columns);
  const auto minutes = aggregate_to_minutes(regs, schema);
  const LabeledDataset ds = attach_labels(minutes, intervals, regs, schema);

  ensure_out_dir(cfg.out_dir);
  const std::string ds_path = cfg.ingest.dataset_out.empty()
                                  ? cfg.out_dir + "/dataset.csv"
                                  : cfg.ingest.dataset_out;
  const std::string sum_path = cfg.ingest.summary_out.empty()
                                   ? cfg.out_dir + "/summary.json"
                                   : cfg.ingest.summary_out;
  write_dataset_csv_file(ds_path, ds);
  write_json(sum_path, dataset_summary(ds).to_json());
  std::cout << "ingest: " << ds.samples.size() << " minute samples, "
            << ds.vocabulary.size() << " activities -> " << ds_path << "\n";
  return 0;
}

int cmd_fit(const ExperimentConfig& cfg, const std::string& h1_csv, const std::string& h2_csv,
            const std::string& groups_csv) {
  const LoadedData d = load_data(cfg);
  ensure_out_dir(cfg.out_dir);
  ScorerConfig scorer = cfg.scorer;
  scorer.seed = cfg.seed;
  if (!h1_csv.empty() || !h2_csv.empty()) {
    if (h1_csv.empty() || h2_csv.empty())
      throw ValidationError("fit: both --h1 and --h2 are required for a binary system");
    const LrSystem sys = fit_lr_system(d.dataset, split_list(h1_csv), split_list(h2_csv), scorer,
                                       cfg.calibrator, cfg.weighted_calibration);
    const std::string path = cfg.out_dir + "/lr_system.json";
    sys.save(path);
    std::cout << "fit: LR system (" << h1_csv << " vs " << h2_csv << "), bounds ["
              << sys.bounds.lower_log10 << ", " << sys.bounds.upper_log10 << "] log10 -> "
              << path << "\n";
    return 0;
  }
  LabeledDataset train = d.dataset;
  std::vector<std::string> classes = d.activities;
  if (!groups_csv.empty()) {
    const ActivityGrouping grouping = cfg.effective_groups();
    const std::vector<std::string> subset = split_list(groups_csv);
    train = relabel_by_groups(d.dataset, grouping, subset);
    classes = subset;
  }
  std::vector<std::string> labels;
  for (const auto& s : train.samples) labels.push_back(s.label);
  const TreeEnsembleModel model =
      fit_scorer(train, classes, scorer, compute_class_weights(labels, classes));
  const std::string path = cfg.out_dir + "/model.json";
  model.save(path);
  std::cout << "fit: multiclass scorer over " << classes.size() << " classes -> " << path
            << "\n";
  return 0;
}

int cmd_evaluate(const ExperimentConfig& cfg, const std::string& h1_csv,
                 const std::string& h2_csv) {
  if (h1_csv.empty() || h2_csv.empty())
    throw ValidationError("evaluate: --h1 and --h2 are required");
  const LoadedData d = load_data(cfg);
  ensure_out_dir(cfg.out_dir);
  const PairEvaluation pe =
      evaluate_pair(d.dataset, split_list(h1_csv), split_list(h2_csv), cfg.plan());
  const BinaryEvalSet set = pe.eval_set();
  const Eigen::ArrayXd scores = pe.scores();

  const CurveData pav = pav_curve(set, scores);
  const CurveData tippett = tippett_curve(set);
  const CurveData ece =
      ece_curve(set, Eigen::ArrayXd::LinSpaced(cfg.ece_points, cfg.ece_lo, cfg.ece_hi));

  svg::PlotStyle style;
  style.title = "PAV (" + h1_csv + ", " + h2_csv + ")";
  style.xlabel = "log10 LR (system)";
  style.ylabel = "log10 LR (PAV-optimal)";
  write_text(cfg.out_dir + "/pav.svg", svg::render_curve(pav, style));
  write_curve_csv(cfg.out_dir + "/pav.csv", pav);
  style.title = "Tippett (" + h1_csv + ", " + h2_csv + ")";
  style.xlabel = "log10 LR";
  style.ylabel = "fraction of llrs >= x";
  write_text(cfg.out_dir + "/tippett.svg", svg::render_curve(tippett, style));
  write_curve_csv(cfg.out_dir + "/tippett.csv", tippett);
  style.title = "ECE (" + h1_csv + ", " + h2_csv + ")";
  style.xlabel = "prior log10 odds";
  style.ylabel = "empirical cross entropy (bits)";
  write_text(cfg.out_dir + "/ece.svg", svg::render_curve(ece, style));
  write_curve_csv(cfg.out_dir + "/ece.csv", ece);

  auto curve_json = [](const CurveData& c) {
    nlohmann::json series = nlohmann::json::object();
    for (const auto& s : c.series) {
      nlohmann::json pts = nlohmann::json::array();
      for (const auto& p : s.points) pts.push_back({p[0], p[1]});
      series[s.name] = pts;
    }
    return series;
  };
  nlohmann::json rep = {{"h1", split_list(h1_csv)},
                        {"h2", split_list(h2_csv)},
                        {"n1", pe.n1},
                        {"n2", pe.n2},
                        {"cllr", pe.report.cllr},
                        {"cllr_min", pe.report.cllr_min},
                        {"cllr_cal", pe.report.cllr_cal},
                        {"bootstrap_cllr", pe.bootstrap_cllr},
                        {"bootstrap_cllr_min", pe.bootstrap_cllr_min},
                        {"lr_bounding", "ELUB surrogate (training-range / sample-size cap)"}};
  write_json(cfg.out_dir + "/evaluation.json", rep);
  write_json(cfg.out_dir + "/curves.json",
             {{"pav", curve_json(pav)}, {"tippett", curve_json(tippett)},
              {"ece", curve_json(ece)}});
  std::cout << "evaluate (" << h1_csv << " vs " << h2_csv << "): cllr=" << pe.report.cllr
            << " cllr_min=" << pe.report.cllr_min << " cllr_cal=" << pe.report.cllr_cal
            << " (bootstrap cllr " << pe.bootstrap_cllr << ") -> " << cfg.out_dir << "\n";
  return 0;
}

void write_matrix_csv(const std::string& path, const PairwiseMatrixReport& rep, bool lower) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  std::vector<std::string> header = {lower ? "cllr_h1_row" : "cllr_min"};
  header.insert(header.end(), rep.activities.begin(), rep.activities.end());
  write_csv_row(out, header);
  const int k = static_cast<int>(rep.activities.size());
  for (int r = 0; r < k; ++r) {
    std::vector<std::string> row = {rep.activities[static_cast<std::size_t>(r)]};
    for (int c = 0; c < k; ++c) {
      double v = std::numeric_limits<double>::quiet_NaN();
      if (r == c) {
        if (lower) v = rep.diagonal[r];
      } else if (lower && r > c) {
        v = rep.cells(r, c);
      } else if (!lower && r < c) {
        v = rep.cells(r, c);
      }
      row.push_back(std::isnan(v) ? "" : format_double(v));
    }
    write_csv_row(out, row);
  }
}

int cmd_pairwise(const ExperimentConfig& cfg) {
  const LoadedData d = load_data(cfg);
  ensure_out_dir(cfg.out_dir);
  const PairwiseRun run = run_pairwise(d.dataset, d.activities, cfg.plan());
  const PairwiseMatrixReport rep = pairwise_matrix(run);

  write_matrix_csv(cfg.out_dir + "/pairwise_cllr.csv", rep, true);
  write_matrix_csv(cfg.out_dir + "/pairwise_cllrmin.csv", rep, false);
  {
    std::ofstream out(cfg.out_dir + "/pairwise_long.csv", std::ios::binary);
    write_csv_row(out, {"h1", "h2", "present", "cllr", "cllr_min", "accuracy", "n_rows"});
    for (const auto& p : run.pairs) {
      write_csv_row(out, {p.h1, p.h2, p.present ? "1" : "0",
                          p.present ? format_double(p.cllr) : "",
                          p.present ? format_double(p.cllr_min) : "",
                          p.present ? format_double(p.accuracy) : "",
                          std::to_string(p.n_rows)});
    }
  }
  svg::PlotStyle style;
  style.title = "Cllr (lower) / Cllr_min (upper), diagonal: mean Cllr";
  write_text(cfg.out_dir + "/heatmap.svg", svg::render_heatmap(rep, style));
  write_json(cfg.out_dir + "/pairwise.json", rep.to_json());

  int present = 0, below1 = 0;
  double mean_cllr = 0;
  for (const auto& p : run.pairs) {
    if (!p.present) continue;
    ++present;
    mean_cllr += p.cllr;
    if (p.cllr < 1.0) ++below1;
  }
  std::cout << "pairwise: " << present << "/" << run.pairs.size() << " systems, mean cllr "
            << (present ? mean_cllr / present : 0.0) << ", " << below1
            << " below 1.0 -> " << cfg.out_dir << "\n";
  return 0;
}

int cmd_ablation(const ExperimentConfig& cfg) {
  const LoadedData d = load_data(cfg);
  ensure_out_dir(cfg.out_dir);
  const std::vector<ScorerFamily> families = {ScorerFamily::gradient_boosted,
                                              ScorerFamily::bagged_ensemble,
                                              ScorerFamily::single_tree};
  const std::vector<CalibratorKind> calibrators = {
      CalibratorKind::logistic, CalibratorKind::kde, CalibratorKind::gaussian};
  const auto table = ablation_sweep(d.dataset, d.activities, families, calibrators, cfg.plan());

  std::ofstream out(cfg.out_dir + "/ablation.csv", std::ios::binary);
  write_csv_row(out, {"family", "calibrator", "accuracy", "mean_cllr", "pct_below_1.00",
                      "pct_below_0.75", "pct_below_0.50", "pct_below_0.25", "n_pairs"});
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : table) {
    write_csv_row(out, {to_string(r.family), to_string(r.calibrator), format_double(r.accuracy),
                        format_double(r.mean_cllr), format_double(r.pct_below[0]),
                        format_double(r.pct_below[1]), format_double(r.pct_below[2]),
                        format_double(r.pct_below[3]), std::to_string(r.n_pairs)});
    rows.push_back({{"family", to_string(r.family)},
                    {"calibrator", to_string(r.calibrator)},
                    {"accuracy", r.accuracy},
                    {"mean_cllr", r.mean_cllr},
                    {"pct_below", r.pct_below},
                    {"n_pairs", r.n_pairs}});
    std::cout << "ablation: " << to_string(r.family) << " + " << to_string(r.calibrator)
              << ": accuracy " << r.accuracy << ", mean cllr " << r.mean_cllr << ", below 1.00: "
              << r.pct_below[0] << "%\n";
  }
  write_json(cfg.out_dir + "/ablation.json", rows);
  return 0;
}

int cmd_sensitivity(const ExperimentConfig& cfg, const std::string& factor_name) {
  if (factor_name.empty())
    throw ValidationError("sensitivity: --factor {phone|location} is required");
  const LoadedData d = load_data(cfg);
  ensure_out_dir(cfg.out_dir);
  const Factor factor = factor_from_string(factor_name);
  const SensitivityReport rep = sensitivity_leave_factor(d.dataset, d.activities, factor,
                                                         cfg.plan());
  const std::string stem = cfg.out_dir + "/sensitivity_" + to_string(factor);
  {
    std::ofstream out(stem + ".csv", std::ios::binary);
    write_csv_row(out, {"level", "n_pairs", "mean_delta_cllr", "wilcoxon_statistic", "p_value"});
    for (const auto& l : rep.levels)
      write_csv_row(out, {l.level, std::to_string(l.n_pairs), format_double(l.mean_delta),
                          format_double(l.test.statistic), format_double(l.test.p_value)});
  }
  {
    std::ofstream out(stem + "_observations.csv", std::ios::binary);
    write_csv_row(out, {"h1", "h2", "level", "cllr_separated", "cllr_control", "delta"});
    for (const auto& o : rep.observations)
      write_csv_row(out, {o.h1, o.h2, o.level, format_double(o.cllr_separated),
                          format_double(o.cllr_control), format_double(o.delta)});
  }
  write_json(stem + ".json", rep.to_json());
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "sensitivity (" << to_string(factor) << "): mean delta cllr " << rep.mean_delta
            << ", one-sided p " << rep.overall.p_value << " over "
            << rep.observations.size() << " (pair, level) cases -> " << stem << ".*\n";
  return 0;
}

int cmd_groups(const ExperimentConfig& cfg) {
  const LoadedData d = load_data(cfg);
  ensure_out_dir(cfg.out_dir);
  const ActivityGrouping grouping = cfg.effective_groups();
  const auto rows = group_sweep(d.dataset, grouping, cfg.plan());

  std::ofstream out(cfg.out_dir + "/groups.csv", std::ios::binary);
  write_csv_row(out, {"groups", "n_groups", "cmxe_normalized", "n_rows"});
  std::vector<std::string> labels;
  std::vector<double> values;
  nlohmann::json jrows = nlohmann::json::array();
  for (const auto& r : rows) {
    const std::string name = join(r.groups, "+");
    write_csv_row(out, {name, std::to_string(r.groups.size()),
                        r.present ? format_double(r.cmxe_norm) : "",
                        std::to_string(r.n_rows)});
    labels.push_back(name);
    values.push_back(r.cmxe_norm);
    jrows.push_back({{"groups", r.groups},
                     {"cmxe_normalized", r.present ? nlohmann::json(r.cmxe_norm) : nlohmann::json()},
                     {"n_rows", r.n_rows}});
  }
  write_json(cfg.out_dir + "/groups.json", jrows);
  svg::PlotStyle style;
  style.title = "Normalized Cmxe by group combination";
  write_text(cfg.out_dir + "/groups.svg", svg::render_bars(labels, values, style));
  std::cout << "groups: " << rows.size() << " combinations -> " << cfg.out_dir << "\n";
  return 0;
}

int cmd_timeline(const ExperimentConfig& cfg) {
  if (cfg.timeline.dataset.empty())
    throw ValidationError("config: timeline.dataset is required for the timeline verb");
  const LoadedData d = load_data(cfg);
  ensure_out_dir(cfg.out_dir);
  const ActivityGrouping grouping = cfg.effective_groups();
  const LabeledDataset sequence = read_dataset_csv_file(cfg.timeline.dataset, d.schema);
  if (sequence.samples.empty()) throw ValidationError("timeline: empty sequence dataset");

  const std::vector<std::string> subset =
      cfg.timeline.groups.empty() ? grouping.group_names() : cfg.timeline.groups;

  // Train on everything except the sequence's subjects, group-labeled.
  std::set<std::string> holdout;
  for (const auto& s : sequence.samples) holdout.insert(s.prov.subject);
  LabeledDataset train = relabel_by_groups(d.dataset, grouping, subset);
  LabeledDataset train_wo;
  train_wo.schema = train.schema;
  for (const auto& s : train.samples)
    if (!holdout.count(s.prov.subject)) train_wo.samples.push_back(s);
  train_wo.rebuild_vocabulary();
  if (train_wo.samples.empty())
    throw ValidationError("timeline: no training data left after holding out the sequence subjects");

  ScorerConfig scorer = cfg.scorer;
  scorer.seed = cfg.seed;
  std::vector<std::string> labels;
  for (const auto& s : train_wo.samples) labels.push_back(s.label);
  std::vector<std::string> classes;
  for (const auto& g : subset)
    if (std::find(train_wo.vocabulary.begin(), train_wo.vocabulary.end(), g) !=
        train_wo.vocabulary.end())
      classes.push_back(g);
  if (classes.size() < 2)
    throw ValidationError("timeline: fewer than two groups have training data");
  const TreeEnsembleModel model =
      fit_scorer(train_wo, classes, scorer, compute_class_weights(labels, classes));
  const Timeline tl = build_timeline(model, sequence.samples, grouping);

  {
    std::ofstream out(cfg.out_dir + "/timeline.csv", std::ios::binary);
    std::vector<std::string> header = {"minute", "truth", "predicted"};
    for (const auto& g : tl.class_order) header.push_back("lik_" + g);
    write_csv_row(out, header);
    for (std::size_t t = 0; t < tl.minutes.size(); ++t) {
      std::vector<std::string> row = {
          format_utc(tl.minutes[t]),
          tl.truth[t] >= 0 ? tl.class_order[static_cast<std::size_t>(tl.truth[t])] : "",
          tl.class_order[static_cast<std::size_t>(tl.predicted[t])]};
      for (Eigen::Index g = 0; g < tl.likelihoods.cols(); ++g)
        row.push_back(format_double(tl.likelihoods(static_cast<Eigen::Index>(t), g)));
      write_csv_row(out, row);
    }
  }
  svg::PlotStyle style;
  style.title = "Activity-group likelihood timeline";
  write_text(cfg.out_dir + "/timeline.svg", svg::render_timeline(tl, style));
  write_json(cfg.out_dir + "/timeline.json",
             {{"minutes", tl.minutes.size()},
              {"labeled", tl.labeled_count()},
              {"correct", tl.correct_count()},
              {"classes", tl.class_order}});
  std::cout << "timeline: " << tl.correct_count() << " of " << tl.labeled_count()
            << " labeled minutes correct -> " << cfg.out_dir << "\n";
  return 0;
}

int cmd_importance(const ExperimentConfig& cfg) {
  const LoadedData d = load_data(cfg);
  ensure_out_dir(cfg.out_dir);
  PairwiseOptions options;
  options.collect_importance = true;
  const PairwiseRun run = run_pairwise(d.dataset, d.activities, cfg.plan(), options);

  // Mean raw importance over the pairings that involve each activity,
  // then row-normalized by the report builder.
  std::map<std::string, Eigen::ArrayXd> accumulated;
  std::map<std::string, int> counts;
  for (const auto& a : d.activities) {
    accumulated[a] = Eigen::ArrayXd::Zero(d.schema.size());
    counts[a] = 0;
  }
  for (const auto& p : run.pairs) {
    if (!p.present || p.importance.size() == 0) continue;
    accumulated[p.h1] += p.importance;
    accumulated[p.h2] += p.importance;
    ++counts[p.h1];
    ++counts[p.h2];
  }
  for (auto& [a, arr] : accumulated)
    if (counts[a] > 0) arr /= static_cast<double>(counts[a]);
  std::vector<std::string> names;
  for (int v = 0; v < d.schema.size(); ++v) names.push_back(d.schema.at(v).name);
  const ImportanceReport rep = ImportanceReport::from_accumulated(names, accumulated);

  {
    std::ofstream out(cfg.out_dir + "/importance.csv", std::ios::binary);
    std::vector<std::string> header = {"activity"};
    header.insert(header.end(), rep.variables.begin(), rep.variables.end());
    write_csv_row(out, header);
    for (std::size_t a = 0; a < rep.activities.size(); ++a) {
      std::vector<std::string> row = {rep.activities[a]};
      for (Eigen::Index v = 0; v < rep.values.cols(); ++v)
        row.push_back(format_double(rep.values(static_cast<Eigen::Index>(a), v)));
      write_csv_row(out, row);
    }
  }
  svg::PlotStyle style;
  style.title = "Variable importance by activity (row-normalized)";
  write_text(cfg.out_dir + "/importance.svg", svg::render_importance(rep, style));
  nlohmann::json j = {{"variables", rep.variables}, {"activities", rep.activities}};
  nlohmann::json matrix = nlohmann::json::array();
  for (Eigen::Index a = 0; a < rep.values.rows(); ++a) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index v = 0; v < rep.values.cols(); ++v) row.push_back(rep.values(a, v));
    matrix.push_back(row);
  }
  j["values"] = matrix;
  write_json(cfg.out_dir + "/importance.json", j);
  std::cout << "importance: " << rep.activities.size() << " activities x "
            << rep.variables.size() << " variables -> " << cfg.out_dir << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"trace2lr: digital-trace likelihood-ratio toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir, h1, h2, factor, groups_csv;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::vector<std::string> overrides;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config (JSON)")->required();
    sub->add_option("--seed", seed, "master seed override")->each([&](const std::string&) {
      seed_given = true;
    });
    sub->add_option("--out", out_dir, "output directory override");
    sub->add_option("--set", overrides, "config override key=value (repeatable)");
    return sub;
  };

  CLI::App* ingest = add_common(app.add_subcommand("ingest", "build the canonical dataset"));
  CLI::App* fit = add_common(app.add_subcommand("fit", "train a scorer or LR system"));
  fit->add_option("--h1", h1, "H1 activity label(s), comma separated");
  fit->add_option("--h2", h2, "H2 activity label(s), comma separated");
  fit->add_option("--groups", groups_csv, "group names for a multiclass fit");
  CLI::App* evaluate =
      add_common(app.add_subcommand("evaluate", "cross-validated evaluation of one pair"));
  evaluate->add_option("--h1", h1, "H1 activity label(s), comma separated");
  evaluate->add_option("--h2", h2, "H2 activity label(s), comma separated");
  CLI::App* pairwise =
      add_common(app.add_subcommand("pairwise", "Cllr matrix over all activity pairs"));
  CLI::App* ablation =
      add_common(app.add_subcommand("ablation", "scorer/calibrator ablation table"));
  CLI::App* sensitivity =
      add_common(app.add_subcommand("sensitivity", "leave-one-factor-level-out analysis"));
  sensitivity->add_option("--factor", factor, "phone or location");
  CLI::App* groups =
      add_common(app.add_subcommand("groups", "group-combination sweep (normalized Cmxe)"));
  groups->add_option("--groups", groups_csv, "restrict to these group names");
  CLI::App* timeline = add_common(app.add_subcommand("timeline", "activity-group timeline"));
  timeline->add_option("--groups", groups_csv, "group names for the timeline classes");
  CLI::App* importance =
      add_common(app.add_subcommand("importance", "per-activity variable importance"));

  std::vector<const char*> argv;
  argv.push_back("trace2lr");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n" << app.help() << "\n";
    return 1;
  }

  try {
    ExperimentConfig cfg = ExperimentConfig::from_json_file(config_path);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos)
        throw ValidationError("override '" + kv + "' is not of the form key=value");
      cfg.set_override(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed_given) cfg.seed = seed;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (!groups_csv.empty() && groups->parsed()) {
      ActivityGrouping all = cfg.effective_groups();
      ActivityGrouping restricted;
      for (const auto& name : split_list(groups_csv)) {
        bool found = false;
        for (const auto& [gname, acts] : all.groups)
          if (gname == name) {
            restricted.groups.push_back({gname, acts});
            found = true;
          }
        if (!found) throw ValidationError("unknown group '" + name + "'");
      }
      cfg.groups = restricted;
    }

    if (ingest->parsed()) return cmd_ingest(cfg);
    if (fit->parsed()) return cmd_fit(cfg, h1, h2, groups_csv);
    if (evaluate->parsed()) return cmd_evaluate(cfg, h1, h2);
    if (pairwise->parsed()) return cmd_pairwise(cfg);
    if (ablation->parsed()) return cmd_ablation(cfg);
    if (sensitivity->parsed()) return cmd_sensitivity(cfg, factor);
    if (groups->parsed()) return cmd_groups(cfg);
    if (timeline->parsed()) {
      ExperimentConfig tcfg = cfg;
      if (!groups_csv.empty()) tcfg.timeline.groups = split_list(groups_csv);
      return cmd_timeline(tcfg);
    }
    if (importance->parsed()) return cmd_importance(cfg);
    std::cerr << "no verb given\n";
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace trace2lr
