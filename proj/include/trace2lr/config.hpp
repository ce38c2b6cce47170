// include/trace2lr/config.hpp

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

#ifndef TRACE2LR_CONFIG_HPP
#define TRACE2LR_CONFIG_HPP

#include <string>
#include <vector>

#include "trace2lr/experiments.hpp"
#include "trace2lr/ingest.hpp"

namespace trace2lr {

/// Experiment configuration file (JSON). Paths are taken relative to the
/// process working directory. CLI flags and --set key=value override fields.
struct ExperimentConfig {
  std::string dataset;      // canonical dataset CSV
  std::string schema_path;  // variable schema JSON
  std::string out_dir = "out";
  std::uint64_t seed = 1;
  int folds = 0;    // 0: leave-one-subject-out
  int threads = 0;  // 0: hardware concurrency (TRACE2LR_THREADS caps)
  std::vector<std::string> activities;  // empty: all labels in the dataset
  ScorerConfig scorer;
  CalibratorKind calibrator = CalibratorKind::logistic;
  bool weighted_calibration = false;
  BootstrapPlan bootstrap;
  ActivityGrouping groups;  // empty: the expert grouping

  struct IngestSection {
    std::string registrations;
    std::string intervals;
    std::string dataset_out;  // default: <out_dir>/dataset.csv
    std::string summary_out;  // default: <out_dir>/summary.json
    IngestColumns columns;
  } ingest;

  struct TimelineSection {
    std::string dataset;  // ordered minutes to predict (canonical CSV)
    std::vector<std::string> groups;  // subset of group names; empty: all
  } timeline;

  double ece_lo = -3.0, ece_hi = 3.0;
  int ece_points = 61;

  static ExperimentConfig from_json_file(const std::string& path);
  void set_override(const std::string& key, const std::string& value);

  ExperimentPlan plan() const;
  ActivityGrouping effective_groups() const;
};

}  // namespace trace2lr

#endif  // TRACE2LR_CONFIG_HPP
