// src/dataset.cpp

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

#include "trace2lr/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <ostream>
#include <set>

#include "trace2lr/common.hpp"
#include "trace2lr/csv.hpp"

namespace trace2lr {

std::string Provenance::describe() const {
  return subject + "/" + phone + "/" + location + "/" + session;
}

void LabeledDataset::rebuild_vocabulary() {
  std::set<std::string> labels;
  for (const auto& s : samples) labels.insert(s.label);
  vocabulary.assign(labels.begin(), labels.end());
}

void write_dataset_csv(std::ostream& out, const LabeledDataset& ds) {
  std::vector<std::string> header = {"minute",   "subject", "phone",
                                     "location", "session", "activity",
                                     "coverage_seconds"};
  for (const auto& v : ds.schema.variables()) header.push_back(v.name);
  write_csv_row(out, header);
  for (const auto& s : ds.samples) {
    std::vector<std::string> row = {format_utc(s.minute), s.prov.subject,
                                    s.prov.phone,         s.prov.location,
                                    s.prov.session,       s.label,
                                    format_double(s.coverage_seconds)};
    for (const auto& f : s.features) {
      switch (f.kind) {
        case FeatureValue::Kind::missing:
          row.emplace_back();
          break;
        case FeatureValue::Kind::number:
          row.push_back(format_double(f.num));
          break;
        case FeatureValue::Kind::token:
          row.push_back(f.tok);
          break;
      }
    }
    write_csv_row(out, row);
  }
}

void write_dataset_csv_file(const std::string& path, const LabeledDataset& ds) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write dataset file '" + path + "'");
  write_dataset_csv(out, ds);
}

namespace {

double parse_number(const std::string& text, std::size_t lineno, const std::string& what) {
  double v = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size())
    throw ValidationError("line " + std::to_string(lineno) + ": unparseable " + what + " '" +
                          text + "'");
  return v;
}

}  // namespace

LabeledDataset read_dataset_csv(std::istream& in, const VariableSchema& schema) {
  CsvTable t = read_csv(in);
  for (const char* col : {"minute", "subject", "phone", "location", "session", "activity",
                          "coverage_seconds"}) {
    if (t.column(col) < 0)
      throw ValidationError(std::string("dataset file missing column '") + col + "'");
  }
  std::vector<int> var_cols(static_cast<std::size_t>(schema.size()));
  for (int v = 0; v < schema.size(); ++v) {
    int c = t.column(schema.at(v).name);
    if (c < 0)
      throw ValidationError("dataset file missing variable column '" + schema.at(v).name + "'");
    var_cols[static_cast<std::size_t>(v)] = c;
  }

  LabeledDataset ds;
  ds.schema = schema;
  const int c_minute = t.column("minute"), c_subject = t.column("subject"),
            c_phone = t.column("phone"), c_location = t.column("location"),
            c_session = t.column("session"), c_activity = t.column("activity"),
            c_cov = t.column("coverage_seconds");
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::size_t lineno = t.line_numbers[r];
    MinuteSample s;
    s.minute = parse_utc(row[static_cast<std::size_t>(c_minute)]);
    s.prov = {row[static_cast<std::size_t>(c_subject)], row[static_cast<std::size_t>(c_phone)],
              row[static_cast<std::size_t>(c_location)], row[static_cast<std::size_t>(c_session)]};
    s.label = row[static_cast<std::size_t>(c_activity)];
    s.coverage_seconds = parse_number(row[static_cast<std::size_t>(c_cov)], lineno, "coverage");
    s.features.resize(static_cast<std::size_t>(schema.size()));
    for (int v = 0; v < schema.size(); ++v) {
      const std::string& cell = row[static_cast<std::size_t>(var_cols[static_cast<std::size_t>(v)])];
      auto& f = s.features[static_cast<std::size_t>(v)];
      if (cell.empty()) {
        f = FeatureValue::make_missing();
      } else if (schema.at(v).is_numeric()) {
        f = FeatureValue::make_number(parse_number(cell, lineno, "value of " + schema.at(v).name));
      } else {
        f = FeatureValue::make_token(cell);
      }
    }
    ds.samples.push_back(std::move(s));
  }
  ds.rebuild_vocabulary();
  return ds;
}

LabeledDataset read_dataset_csv_file(const std::string& path, const VariableSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dataset file '" + path + "'");
  return read_dataset_csv(in, schema);
}

}  // namespace trace2lr
