// src/schema.cpp

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

#include "trace2lr/schema.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "trace2lr/common.hpp"

namespace trace2lr {

const char* to_string(VariableKind k) {
  switch (k) {
    case VariableKind::categorical:
      return "categorical";
    case VariableKind::cumulative_numeric:
      return "cumulative_numeric";
    case VariableKind::noncumulative_numeric:
      return "noncumulative_numeric";
  }
  return "unknown";
}

VariableKind variable_kind_from_string(const std::string& s) {
  if (s == "categorical") return VariableKind::categorical;
  if (s == "cumulative_numeric" || s == "cumulative") return VariableKind::cumulative_numeric;
  if (s == "noncumulative_numeric" || s == "noncumulative" || s == "non_cumulative")
    return VariableKind::noncumulative_numeric;
  throw ValidationError("unknown variable kind '" + s + "'");
}

VariableSchema::VariableSchema(std::vector<Variable> vars) : vars_(std::move(vars)) {
  for (int i = 0; i < size(); ++i) {
    if (vars_[i].name.empty()) throw ValidationError("schema variable with empty name");
    auto [it, inserted] = index_.emplace(vars_[i].name, i);
    (void)it;
    if (!inserted) throw ValidationError("duplicate variable '" + vars_[i].name + "' in schema");
  }
}

int VariableSchema::index_of(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? -1 : it->second;
}

VariableSchema VariableSchema::from_json(const nlohmann::json& j) {
  if (!j.contains("variables") || !j["variables"].is_array())
    throw ValidationError("schema JSON must contain a 'variables' array");
  std::vector<Variable> vars;
  for (const auto& v : j["variables"]) {
    Variable var;
    var.name = v.at("name").get<std::string>();
    var.kind = variable_kind_from_string(v.at("kind").get<std::string>());
    var.source_table = v.value("source_table", std::string());
    vars.push_back(std::move(var));
  }
  return VariableSchema(std::move(vars));
}

VariableSchema VariableSchema::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open schema file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("schema file '" + path + "': " + e.what());
  }
  return from_json(j);
}

nlohmann::json VariableSchema::to_json() const {
  nlohmann::json vars = nlohmann::json::array();
  for (const auto& v : vars_) {
    vars.push_back({{"name", v.name}, {"kind", to_string(v.kind)}, {"source_table", v.source_table}});
  }
  return {{"variables", vars}};
}

bool VariableSchema::operator==(const VariableSchema& other) const {
  if (size() != other.size()) return false;
  for (int i = 0; i < size(); ++i) {
    if (vars_[i].name != other.vars_[i].name || vars_[i].kind != other.vars_[i].kind)
      return false;
  }
  return true;
}

}  // namespace trace2lr
