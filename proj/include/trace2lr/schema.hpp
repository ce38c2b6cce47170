// include/trace2lr/schema.hpp

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

#ifndef TRACE2LR_SCHEMA_HPP
#define TRACE2LR_SCHEMA_HPP

#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace trace2lr {

/// Variable taxonomy of the trace tables. Cumulative numerics are summed
/// within a minute, non-cumulative ones averaged, categoricals take the mode.
enum class VariableKind { categorical, cumulative_numeric, noncumulative_numeric };

const char* to_string(VariableKind k);
VariableKind variable_kind_from_string(const std::string& s);

struct Variable {
  std::string name;
  VariableKind kind = VariableKind::noncumulative_numeric;
  std::string source_table;  // informational

  bool is_numeric() const { return kind != VariableKind::categorical; }
};

/// Ordered set of variables with unique names.
class VariableSchema {
 public:
  VariableSchema() = default;
  explicit VariableSchema(std::vector<Variable> vars);

  int size() const { return static_cast<int>(vars_.size()); }
  const Variable& at(int i) const { return vars_.at(static_cast<std::size_t>(i)); }
  const std::vector<Variable>& variables() const { return vars_; }

  /// Index of a variable name, or -1 when unknown.
  int index_of(const std::string& name) const;

  static VariableSchema from_json(const nlohmann::json& j);
  static VariableSchema from_json_file(const std::string& path);
  nlohmann::json to_json() const;

  bool operator==(const VariableSchema& other) const;

 private:
  std::vector<Variable> vars_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace trace2lr

#endif  // TRACE2LR_SCHEMA_HPP
