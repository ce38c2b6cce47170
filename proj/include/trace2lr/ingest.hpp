// include/trace2lr/ingest.hpp

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

#ifndef TRACE2LR_INGEST_HPP
#define TRACE2LR_INGEST_HPP

#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "trace2lr/dataset.hpp"

namespace trace2lr {

/// Column-name mapping for the registrations / intervals files. Defaults
/// match the canonical export; override per file via the schema sidecar.
struct IngestColumns {
  std::string timestamp = "timestamp";
  std::string variable = "variable";
  std::string value = "value";
  std::string subject = "subject";
  std::string phone = "phone";
  std::string location = "location";
  std::string session = "session";
  std::string activity = "activity";
  std::string start = "start";
  std::string end = "end";
};

/// Parses a registrations export. One RawRegistration per row, row order
/// preserved; values typed against the schema kind.
std::vector<RawRegistration> load_registrations(const std::string& path,
                                                const VariableSchema& schema,
                                                const IngestColumns& cols = {});
std::vector<RawRegistration> load_registrations(std::istream& in, const VariableSchema& schema,
                                                const IngestColumns& cols = {});

std::vector<ActivityInterval> load_intervals(const std::string& path,
                                             const IngestColumns& cols = {});
std::vector<ActivityInterval> load_intervals(std::istream& in, const IngestColumns& cols = {});

using MinuteKey = std::pair<Provenance, UtcSeconds>;
using MinuteFeatureMap = std::map<MinuteKey, std::vector<FeatureValue>>;

/// Aggregates registrations into one-minute cells: mode for categoricals
/// (ties broken by the lexicographically smallest token), sum for cumulative
/// numerics, mean for non-cumulative ones. Variables with no registration in
/// the minute stay missing.
MinuteFeatureMap aggregate_to_minutes(const std::vector<RawRegistration>& regs,
                                      const VariableSchema& schema);

/// Attaches ground-truth labels. Minutes wholly inside one interval keep the
/// precomputed aggregate with coverage 60; minutes overlapping several
/// intervals are split, each part re-aggregated from the registrations that
/// fall inside its interval. Minutes with no overlapping interval are
/// dropped. Overlapping intervals within one provenance are an error.
LabeledDataset attach_labels(const MinuteFeatureMap& minute_features,
                             const std::vector<ActivityInterval>& intervals,
                             const std::vector<RawRegistration>& regs,
                             const VariableSchema& schema);

struct SchemaReport {
  struct VariableStats {
    std::string name;
    double missing_rate = 0.0;
  };
  std::vector<VariableStats> variables;
  std::map<std::string, std::size_t> activity_counts;
  std::vector<std::string> subjects, phones, locations, sessions;
  std::size_t n_samples = 0;

  nlohmann::json to_json() const;
};

SchemaReport dataset_summary(const LabeledDataset& ds);

}  // namespace trace2lr

#endif  // TRACE2LR_INGEST_HPP
