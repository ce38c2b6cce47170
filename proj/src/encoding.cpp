// src/encoding.cpp

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

#include "trace2lr/encoding.hpp"

#include <numeric>

#include <nlohmann/json.hpp>

#include "trace2lr/common.hpp"

namespace trace2lr {

namespace {

void check_inputs(std::size_t n_column, std::size_t n_targets, const std::vector<int>& perm) {
  if (n_column != n_targets)
    throw ValidationError("ordered encoding: column and targets length mismatch");
  if (perm.size() != n_column)
    throw ValidationError("ordered encoding: permutation length mismatch");
  std::vector<char> seen(n_column, 0);
  for (int p : perm) {
    if (p < 0 || static_cast<std::size_t>(p) >= n_column || seen[static_cast<std::size_t>(p)])
      throw ValidationError("ordered encoding: permutation is not a bijection");
    seen[static_cast<std::size_t>(p)] = 1;
  }
}

}  // namespace

CategoryEncoderState fit_ordered_encoder(const std::vector<std::optional<std::string>>& column,
                                         const std::vector<double>& targets,
                                         const std::vector<int>& permutation, double prior,
                                         std::vector<double>* encoded_out) {
  check_inputs(column.size(), targets.size(), permutation);
  CategoryEncoderState state;
  state.prior = prior;
  const std::size_t n = column.size();
  state.p0 = n == 0 ? 0.0
                    : std::accumulate(targets.begin(), targets.end(), 0.0) /
                          static_cast<double>(n);
  if (encoded_out) encoded_out->assign(n, 0.0);
  for (int pos : permutation) {
    const auto& cell = column[static_cast<std::size_t>(pos)];
    CategoryEncoderState::TokenStats& st =
        cell.has_value() ? state.tokens[*cell] : state.missing;
    if (encoded_out)
      (*encoded_out)[static_cast<std::size_t>(pos)] =
          (st.sum + prior * state.p0) / (st.count + prior);
    st.count += 1.0;
    st.sum += targets[static_cast<std::size_t>(pos)];
  }
  return state;
}

std::vector<double> encode_ordered_categorical(
    const std::vector<std::optional<std::string>>& column, const std::vector<double>& targets,
    const std::vector<int>& permutation, double prior) {
  std::vector<double> encoded;
  fit_ordered_encoder(column, targets, permutation, prior, &encoded);
  return encoded;
}

double CategoryEncoderState::encode(const FeatureValue& v) const {
  const TokenStats* st = &missing;
  if (v.kind == FeatureValue::Kind::token) {
    auto it = tokens.find(v.tok);
    if (it != tokens.end()) st = &it->second;
    // Unknown token at inference: fall through to the missing statistic.
  }
  return (st->sum + prior * p0) / (st->count + prior);
}

nlohmann::json CategoryEncoderState::to_json() const {
  nlohmann::json toks = nlohmann::json::object();
  for (const auto& [tok, st] : tokens) toks[tok] = {{"count", st.count}, {"sum", st.sum}};
  return {{"p0", p0},
          {"prior", prior},
          {"missing", {{"count", missing.count}, {"sum", missing.sum}}},
          {"tokens", toks}};
}

CategoryEncoderState CategoryEncoderState::from_json(const nlohmann::json& j) {
  CategoryEncoderState s;
  s.p0 = j.at("p0").get<double>();
  s.prior = j.at("prior").get<double>();
  s.missing.count = j.at("missing").at("count").get<double>();
  s.missing.sum = j.at("missing").at("sum").get<double>();
  for (auto it = j.at("tokens").begin(); it != j.at("tokens").end(); ++it) {
    s.tokens[it.key()] = {it.value().at("count").get<double>(),
                          it.value().at("sum").get<double>()};
  }
  return s;
}

}  // namespace trace2lr
