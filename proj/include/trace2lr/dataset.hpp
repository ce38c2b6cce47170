// include/trace2lr/dataset.hpp

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

#ifndef TRACE2LR_DATASET_HPP
#define TRACE2LR_DATASET_HPP

#include <compare>
#include <iosfwd>
#include <string>
#include <vector>

#include "trace2lr/schema.hpp"
#include "trace2lr/time.hpp"

namespace trace2lr {

/// Where a registration came from. Used as the grouping key for minute
/// aggregation and as the resampling factors of the multilevel bootstrap.
struct Provenance {
  std::string subject;
  std::string phone;
  std::string location;
  std::string session;

  auto operator<=>(const Provenance&) const = default;
  std::string describe() const;
};

/// One aggregated cell: a registered number, a categorical token, or an
/// explicit missing value. A registered zero is kept distinct from missing.
struct FeatureValue {
  enum class Kind : unsigned char { missing, number, token };

  Kind kind = Kind::missing;
  double num = 0.0;
  std::string tok;

  static FeatureValue make_missing() { return {}; }
  static FeatureValue make_number(double v) { return {Kind::number, v, {}}; }
  static FeatureValue make_token(std::string t) { return {Kind::token, 0.0, std::move(t)}; }

  bool is_missing() const { return kind == Kind::missing; }
  bool operator==(const FeatureValue&) const = default;
};

/// One timestamped variable reading from a trace table.
struct RawRegistration {
  UtcSeconds timestamp = 0;
  int variable = -1;  // index into the schema
  FeatureValue value;
  Provenance prov;
};

/// Ground-truth activity span, half-open [start, end).
struct ActivityInterval {
  std::string activity;
  UtcSeconds start = 0;
  UtcSeconds end = 0;
  Provenance prov;
};

/// One labeled minute of aggregated features. coverage_seconds < 60 marks a
/// split minute that shares its timestamp with a sibling of another label.
struct MinuteSample {
  UtcSeconds minute = 0;
  std::vector<FeatureValue> features;  // aligned with the schema
  std::string label;
  double coverage_seconds = 60.0;
  Provenance prov;
};

struct LabeledDataset {
  VariableSchema schema;
  std::vector<MinuteSample> samples;
  std::vector<std::string> vocabulary;  // sorted unique labels

  void rebuild_vocabulary();
};

/// Canonical dataset file: one row per MinuteSample, missing values encoded
/// as empty fields. Readable back with the same schema.
void write_dataset_csv(std::ostream& out, const LabeledDataset& ds);
void write_dataset_csv_file(const std::string& path, const LabeledDataset& ds);

/// Row order of the file is preserved (timelines rely on it).
LabeledDataset read_dataset_csv(std::istream& in, const VariableSchema& schema);
LabeledDataset read_dataset_csv_file(const std::string& path, const VariableSchema& schema);

}  // namespace trace2lr

#endif  // TRACE2LR_DATASET_HPP
