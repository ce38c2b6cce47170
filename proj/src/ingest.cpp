// src/ingest.cpp

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

#include "trace2lr/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "trace2lr/common.hpp"
#include "trace2lr/csv.hpp"

namespace trace2lr {

namespace {

int required_column(const CsvTable& t, const std::string& name) {
  int c = t.column(name);
  if (c < 0) throw ValidationError("missing header column '" + name + "'");
  return c;
}

Provenance read_provenance(const std::vector<std::string>& row, int c_subject, int c_phone,
                           int c_location, int c_session, std::size_t lineno) {
  Provenance p{row[static_cast<std::size_t>(c_subject)], row[static_cast<std::size_t>(c_phone)],
               row[static_cast<std::size_t>(c_location)], row[static_cast<std::size_t>(c_session)]};
  if (p.subject.empty() || p.phone.empty() || p.location.empty() || p.session.empty())
    throw ValidationError("line " + std::to_string(lineno) + ": empty provenance field");
  return p;
}

}  // namespace

std::vector<RawRegistration> load_registrations(const std::string& path,
                                                const VariableSchema& schema,
                                                const IngestColumns& cols) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open registrations file '" + path + "'");
  return load_registrations(in, schema, cols);
}

std::vector<RawRegistration> load_registrations(std::istream& in, const VariableSchema& schema,
                                                const IngestColumns& cols) {
  CsvTable t = read_csv(in);
  const int c_ts = required_column(t, cols.timestamp);
  const int c_var = required_column(t, cols.variable);
  const int c_val = required_column(t, cols.value);
  const int c_subject = required_column(t, cols.subject);
  const int c_phone = required_column(t, cols.phone);
  const int c_location = required_column(t, cols.location);
  const int c_session = required_column(t, cols.session);

  std::vector<RawRegistration> out;
  out.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::size_t lineno = t.line_numbers[r];
    RawRegistration reg;
    const std::string& var_name = row[static_cast<std::size_t>(c_var)];
    reg.variable = schema.index_of(var_name);
    if (reg.variable < 0)
      throw ValidationError("variable '" + var_name + "' (line " + std::to_string(lineno) +
                            ") is not declared in the schema");
    try {
      reg.timestamp = parse_utc(row[static_cast<std::size_t>(c_ts)]);
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(lineno) + ": " + e.what());
    }
    const std::string& raw = row[static_cast<std::size_t>(c_val)];
    if (schema.at(reg.variable).is_numeric()) {
      double v = 0;
      auto [p, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
      if (ec != std::errc() || p != raw.data() + raw.size() || !std::isfinite(v))
        throw ValidationError("line " + std::to_string(lineno) + ": unparseable numeric value '" +
                              raw + "' for variable '" + var_name + "'");
      reg.value = FeatureValue::make_number(v);
    } else {
      if (raw.empty())
        throw ValidationError("line " + std::to_string(lineno) + ": empty token for variable '" +
                              var_name + "'");
      reg.value = FeatureValue::make_token(raw);
    }
    reg.prov = read_provenance(row, c_subject, c_phone, c_location, c_session, lineno);
    out.push_back(std::move(reg));
  }
  return out;
}

std::vector<ActivityInterval> load_intervals(const std::string& path, const IngestColumns& cols) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open intervals file '" + path + "'");
  return load_intervals(in, cols);
}

std::vector<ActivityInterval> load_intervals(std::istream& in, const IngestColumns& cols) {
  CsvTable t = read_csv(in);
  const int c_act = required_column(t, cols.activity);
  const int c_start = required_column(t, cols.start);
  const int c_end = required_column(t, cols.end);
  const int c_subject = required_column(t, cols.subject);
  const int c_phone = required_column(t, cols.phone);
  const int c_location = required_column(t, cols.location);
  const int c_session = required_column(t, cols.session);

  std::vector<ActivityInterval> out;
  out.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::size_t lineno = t.line_numbers[r];
    ActivityInterval iv;
    iv.activity = row[static_cast<std::size_t>(c_act)];
    if (iv.activity.empty())
      throw ValidationError("line " + std::to_string(lineno) + ": empty activity label");
    try {
      iv.start = parse_utc(row[static_cast<std::size_t>(c_start)]);
      iv.end = parse_utc(row[static_cast<std::size_t>(c_end)]);
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(lineno) + ": " + e.what());
    }
    if (iv.start >= iv.end)
      throw ValidationError("line " + std::to_string(lineno) + ": interval start not before end");
    iv.prov = read_provenance(row, c_subject, c_phone, c_location, c_session, lineno);
    out.push_back(std::move(iv));
  }
  return out;
}

namespace {

/// Aggregation rule for the registrations of one variable in one minute.
FeatureValue aggregate_cell(const std::vector<const FeatureValue*>& vals, VariableKind kind) {
  if (vals.empty()) return FeatureValue::make_missing();
  switch (kind) {
    case VariableKind::categorical: {
      std::map<std::string, int> counts;  // ordered: tie -> smallest token
      for (const auto* v : vals) ++counts[v->tok];
      const std::string* best = nullptr;
      int best_count = 0;
      for (const auto& [tok, n] : counts) {
        if (n > best_count) {
          best = &tok;
          best_count = n;
        }
      }
      return FeatureValue::make_token(*best);
    }
    case VariableKind::cumulative_numeric: {
      double s = 0;
      for (const auto* v : vals) s += v->num;
      return FeatureValue::make_number(s);
    }
    case VariableKind::noncumulative_numeric: {
      double s = 0;
      for (const auto* v : vals) s += v->num;
      return FeatureValue::make_number(s / static_cast<double>(vals.size()));
    }
  }
  return FeatureValue::make_missing();
}

std::vector<FeatureValue> aggregate_group(const std::vector<const RawRegistration*>& regs,
                                          const VariableSchema& schema) {
  std::vector<std::vector<const FeatureValue*>> per_var(
      static_cast<std::size_t>(schema.size()));
  for (const auto* r : regs) per_var[static_cast<std::size_t>(r->variable)].push_back(&r->value);
  std::vector<FeatureValue> out(static_cast<std::size_t>(schema.size()));
  for (int v = 0; v < schema.size(); ++v)
    out[static_cast<std::size_t>(v)] =
        aggregate_cell(per_var[static_cast<std::size_t>(v)], schema.at(v).kind);
  return out;
}

}  // namespace

MinuteFeatureMap aggregate_to_minutes(const std::vector<RawRegistration>& regs,
                                      const VariableSchema& schema) {
  std::map<MinuteKey, std::vector<const RawRegistration*>> groups;
  for (const auto& r : regs) groups[{r.prov, truncate_to_minute(r.timestamp)}].push_back(&r);
  MinuteFeatureMap out;
  for (const auto& [key, group] : groups) out.emplace(key, aggregate_group(group, schema));
  return out;
}

LabeledDataset attach_labels(const MinuteFeatureMap& minute_features,
                             const std::vector<ActivityInterval>& intervals,
                             const std::vector<RawRegistration>& regs,
                             const VariableSchema& schema) {
  // Validate: intervals within one provenance must not overlap.
  std::map<Provenance, std::vector<const ActivityInterval*>> by_prov;
  for (const auto& iv : intervals) by_prov[iv.prov].push_back(&iv);
  for (auto& [prov, ivs] : by_prov) {
    std::sort(ivs.begin(), ivs.end(), [](const ActivityInterval* a, const ActivityInterval* b) {
      return a->start < b->start;
    });
    for (std::size_t i = 1; i < ivs.size(); ++i) {
      if (ivs[i - 1]->end > ivs[i]->start)
        throw ValidationError("overlapping intervals for " + prov.describe() + ": '" +
                              ivs[i - 1]->activity + "' [" + format_utc(ivs[i - 1]->start) + ", " +
                              format_utc(ivs[i - 1]->end) + ") overlaps '" + ivs[i]->activity +
                              "' starting " + format_utc(ivs[i]->start));
    }
  }

  // Registrations grouped per (provenance, minute) for split-minute
  // re-aggregation.
  std::map<MinuteKey, std::vector<const RawRegistration*>> reg_groups;
  for (const auto& r : regs) reg_groups[{r.prov, truncate_to_minute(r.timestamp)}].push_back(&r);

  LabeledDataset ds;
  ds.schema = schema;
  for (const auto& [key, features] : minute_features) {
    const auto& [prov, minute] = key;
    auto it = by_prov.find(prov);
    if (it == by_prov.end()) continue;
    const UtcSeconds m_end = minute + 60;
    std::vector<const ActivityInterval*> overlapping;
    for (const auto* iv : it->second) {
      if (iv->start < m_end && iv->end > minute) overlapping.push_back(iv);
    }
    if (overlapping.empty()) continue;

    const ActivityInterval* only = overlapping.size() == 1 ? overlapping.front() : nullptr;
    if (only && only->start <= minute && only->end >= m_end) {
      MinuteSample s;
      s.minute = minute;
      s.features = features;
      s.label = only->activity;
      s.coverage_seconds = 60.0;
      s.prov = prov;
      ds.samples.push_back(std::move(s));
      continue;
    }

    // Split (or partially covered) minute: one sample per distinct label,
    // aggregated from the registrations inside that label's interval(s).
    auto rit = reg_groups.find(key);
    static const std::vector<const RawRegistration*> kNone;
    const auto& minute_regs = rit == reg_groups.end() ? kNone : rit->second;
    std::map<std::string, std::vector<const ActivityInterval*>> by_label;
    for (const auto* iv : overlapping) by_label[iv->activity].push_back(iv);
    for (const auto& [label, ivs] : by_label) {
      std::vector<const RawRegistration*> inside;
      UtcSeconds covered = 0;
      for (const auto* iv : ivs) {
        covered += std::min(iv->end, m_end) - std::max(iv->start, minute);
        for (const auto* r : minute_regs)
          if (r->timestamp >= iv->start && r->timestamp < iv->end) inside.push_back(r);
      }
      MinuteSample s;
      s.minute = minute;
      s.features = aggregate_group(inside, schema);
      s.label = label;
      s.coverage_seconds = static_cast<double>(covered);
      s.prov = prov;
      ds.samples.push_back(std::move(s));
    }
  }

  std::stable_sort(ds.samples.begin(), ds.samples.end(),
                   [](const MinuteSample& a, const MinuteSample& b) {
                     if (a.prov != b.prov) return a.prov < b.prov;
                     if (a.minute != b.minute) return a.minute < b.minute;
                     return a.label < b.label;
                   });
  ds.rebuild_vocabulary();
  return ds;
}

SchemaReport dataset_summary(const LabeledDataset& ds) {
  if (ds.samples.empty()) throw ValidationError("dataset_summary: empty dataset");
  SchemaReport rep;
  rep.n_samples = ds.samples.size();
  std::vector<std::size_t> missing(static_cast<std::size_t>(ds.schema.size()), 0);
  std::set<std::string> subjects, phones, locations, sessions;
  for (const auto& s : ds.samples) {
    ++rep.activity_counts[s.label];
    subjects.insert(s.prov.subject);
    phones.insert(s.prov.phone);
    locations.insert(s.prov.location);
    sessions.insert(s.prov.session);
    for (std::size_t v = 0; v < s.features.size(); ++v)
      if (s.features[v].is_missing()) ++missing[v];
  }
  for (int v = 0; v < ds.schema.size(); ++v) {
    rep.variables.push_back({ds.schema.at(v).name,
                             static_cast<double>(missing[static_cast<std::size_t>(v)]) /
                                 static_cast<double>(rep.n_samples)});
  }
  rep.subjects.assign(subjects.begin(), subjects.end());
  rep.phones.assign(phones.begin(), phones.end());
  rep.locations.assign(locations.begin(), locations.end());
  rep.sessions.assign(sessions.begin(), sessions.end());
  return rep;
}

nlohmann::json SchemaReport::to_json() const {
  nlohmann::json vars = nlohmann::json::array();
  for (const auto& v : variables)
    vars.push_back({{"name", v.name}, {"missing_rate", v.missing_rate}});
  nlohmann::json acts = nlohmann::json::object();
  for (const auto& [label, n] : activity_counts) acts[label] = n;
  return {{"n_samples", n_samples}, {"variables", vars},   {"activities", acts},
          {"subjects", subjects},   {"phones", phones},    {"locations", locations},
          {"sessions", sessions}};
}

}  // namespace trace2lr
