// src/config.cpp

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

#include "trace2lr/config.hpp"

#include <charconv>
#include <fstream>

#include <nlohmann/json.hpp>

#include "trace2lr/common.hpp"

namespace trace2lr {

namespace {

template <typename T>
T parse_integer(const std::string& value, const std::string& key) {
  T v{};
  auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || p != value.data() + value.size())
    throw ValidationError("override " + key + ": expected an integer, got '" + value + "'");
  return v;
}

double parse_real(const std::string& value, const std::string& key) {
  double v = 0;
  auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || p != value.data() + value.size())
    throw ValidationError("override " + key + ": expected a number, got '" + value + "'");
  return v;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("config file '" + path + "': " + e.what());
  }

  ExperimentConfig c;
  c.dataset = j.value("dataset", std::string());
  c.schema_path = j.value("schema", std::string());
  c.out_dir = j.value("out_dir", std::string("out"));
  c.seed = j.value("seed", std::uint64_t{1});
  c.folds = j.value("folds", 0);
  c.threads = j.value("threads", 0);
  if (j.contains("activities")) c.activities = j["activities"].get<std::vector<std::string>>();
  if (j.contains("scorer")) {
    const auto& s = j["scorer"];
    if (s.contains("family"))
      c.scorer = ScorerConfig::defaults_for(
          scorer_family_from_string(s["family"].get<std::string>()));
    c.scorer.rounds = s.value("rounds", c.scorer.rounds);
    c.scorer.max_depth = s.value("max_depth", c.scorer.max_depth);
    c.scorer.learning_rate = s.value("learning_rate", c.scorer.learning_rate);
    c.scorer.min_samples_leaf = s.value("min_samples_leaf", c.scorer.min_samples_leaf);
  }
  c.calibrator = j.contains("calibrator")
                     ? calibrator_kind_from_string(j["calibrator"].get<std::string>())
                     : CalibratorKind::logistic;
  c.weighted_calibration = j.value("weighted_calibration", false);
  if (j.contains("bootstrap")) {
    c.bootstrap.replicates = j["bootstrap"].value("replicates", 1000);
    c.bootstrap.seed = j["bootstrap"].value("seed", std::uint64_t{0});
  }
  if (j.contains("groups")) c.groups = ActivityGrouping::from_json(j["groups"]);
  if (j.contains("ingest")) {
    const auto& g = j["ingest"];
    c.ingest.registrations = g.value("registrations", std::string());
    c.ingest.intervals = g.value("intervals", std::string());
    c.ingest.dataset_out = g.value("dataset_out", std::string());
    c.ingest.summary_out = g.value("summary_out", std::string());
    if (g.contains("columns")) {
      const auto& cols = g["columns"];
      auto get = [&](const char* key, std::string& field) {
        if (cols.contains(key)) field = cols[key].get<std::string>();
      };
      get("timestamp", c.ingest.columns.timestamp);
      get("variable", c.ingest.columns.variable);
      get("value", c.ingest.columns.value);
      get("subject", c.ingest.columns.subject);
      get("phone", c.ingest.columns.phone);
      get("location", c.ingest.columns.location);
      get("session", c.ingest.columns.session);
      get("activity", c.ingest.columns.activity);
      get("start", c.ingest.columns.start);
      get("end", c.ingest.columns.end);
    }
  }
  if (j.contains("timeline")) {
    c.timeline.dataset = j["timeline"].value("dataset", std::string());
    if (j["timeline"].contains("groups"))
      c.timeline.groups = j["timeline"]["groups"].get<std::vector<std::string>>();
  }
  if (j.contains("ece_grid")) {
    c.ece_lo = j["ece_grid"].value("lo", -3.0);
    c.ece_hi = j["ece_grid"].value("hi", 3.0);
    c.ece_points = j["ece_grid"].value("points", 61);
  }
  return c;
}

void ExperimentConfig::set_override(const std::string& key, const std::string& value) {
  if (key == "dataset") {
    dataset = value;
  } else if (key == "schema") {
    schema_path = value;
  } else if (key == "out_dir") {
    out_dir = value;
  } else if (key == "seed") {
    seed = parse_integer<std::uint64_t>(value, key);
  } else if (key == "folds") {
    folds = parse_integer<int>(value, key);
  } else if (key == "threads") {
    threads = parse_integer<int>(value, key);
  } else if (key == "calibrator") {
    calibrator = calibrator_kind_from_string(value);
  } else if (key == "weighted_calibration") {
    weighted_calibration = value == "true" || value == "1";
  } else if (key == "scorer.family") {
    const ScorerConfig base = scorer;
    scorer = ScorerConfig::defaults_for(scorer_family_from_string(value));
    scorer.min_samples_leaf = base.min_samples_leaf;
  } else if (key == "scorer.rounds") {
    scorer.rounds = parse_integer<int>(value, key);
  } else if (key == "scorer.max_depth") {
    scorer.max_depth = parse_integer<int>(value, key);
  } else if (key == "scorer.learning_rate") {
    scorer.learning_rate = parse_real(value, key);
  } else if (key == "scorer.min_samples_leaf") {
    scorer.min_samples_leaf = parse_integer<int>(value, key);
  } else if (key == "bootstrap.replicates") {
    bootstrap.replicates = parse_integer<int>(value, key);
  } else if (key == "bootstrap.seed") {
    bootstrap.seed = parse_integer<std::uint64_t>(value, key);
  } else if (key == "timeline.dataset") {
    timeline.dataset = value;
  } else {
    throw ValidationError("unknown override key '" + key + "'");
  }
}

ExperimentPlan ExperimentConfig::plan() const {
  ExperimentPlan p;
  p.scorer = scorer;
  p.scorer.seed = seed;
  p.calibrator = calibrator;
  p.folds = folds;
  p.bootstrap = bootstrap;
  if (p.bootstrap.seed == 0) p.bootstrap.seed = derive_seed(seed, "bootstrap");
  p.seed = seed;
  p.threads = threads;
  return p;
}

ActivityGrouping ExperimentConfig::effective_groups() const {
  if (!groups.groups.empty()) return groups;
  return default_expert_grouping();
}

}  // namespace trace2lr
