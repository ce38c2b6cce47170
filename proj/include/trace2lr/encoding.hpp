// include/trace2lr/encoding.hpp

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

#ifndef TRACE2LR_ENCODING_HPP
#define TRACE2LR_ENCODING_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "trace2lr/dataset.hpp"

namespace trace2lr {

/// Ordered target statistic for one categorical column: row i (taken in
/// permutation order) is encoded from the target statistics of same-token
/// rows strictly earlier in the permutation, shrunk toward the global target
/// mean p0 by `prior`. A missing value acts as its own token.
std::vector<double> encode_ordered_categorical(
    const std::vector<std::optional<std::string>>& column, const std::vector<double>& targets,
    const std::vector<int>& permutation, double prior);

/// Full-column target statistics of one (categorical variable, target class)
/// pair, used to encode at inference time. Tokens never seen in training are
/// encoded like a missing value.
struct CategoryEncoderState {
  struct TokenStats {
    double count = 0.0;
    double sum = 0.0;
  };

  double p0 = 0.0;
  double prior = 1.0;
  std::map<std::string, TokenStats> tokens;
  TokenStats missing;

  double encode(const FeatureValue& v) const;

  nlohmann::json to_json() const;
  static CategoryEncoderState from_json(const nlohmann::json& j);
};

/// Computes both the ordered-encoded training column and the inference
/// state in one pass over the permutation.
CategoryEncoderState fit_ordered_encoder(const std::vector<std::optional<std::string>>& column,
                                         const std::vector<double>& targets,
                                         const std::vector<int>& permutation, double prior,
                                         std::vector<double>* encoded_out);

}  // namespace trace2lr

#endif  // TRACE2LR_ENCODING_HPP
