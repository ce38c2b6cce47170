// include/trace2lr/cli.hpp

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

#ifndef TRACE2LR_CLI_HPP
#define TRACE2LR_CLI_HPP

#include <string>
#include <vector>

namespace trace2lr {

/// Batch command-line entry point. Verbs: ingest, fit, evaluate, pairwise,
/// ablation, sensitivity, groups, timeline, importance.
/// Returns 0 on success, 1 on validation/usage errors, 2 on runtime errors.
int run_cli(const std::vector<std::string>& args);

}  // namespace trace2lr

#endif  // TRACE2LR_CLI_HPP
