// include/trace2lr/time.hpp

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

#ifndef TRACE2LR_TIME_HPP
#define TRACE2LR_TIME_HPP

#include <cstdint>
#include <string>

namespace trace2lr {

/// Seconds since the Unix epoch, UTC. All timestamps in the toolkit carry
/// second resolution; no timezone inference is performed.
using UtcSeconds = std::int64_t;

/// Parses "YYYY-MM-DDTHH:MM:SS" (also accepts a space separator, a trailing
/// "Z", and plain integer epoch seconds). Throws ValidationError otherwise.
UtcSeconds parse_utc(const std::string& text);

/// Formats as "YYYY-MM-DDTHH:MM:SS" (UTC implied).
std::string format_utc(UtcSeconds t);

/// Wall-clock minute truncation in UTC.
inline UtcSeconds truncate_to_minute(UtcSeconds t) {
  UtcSeconds r = t % 60;
  if (r < 0) r += 60;
  return t - r;
}

}  // namespace trace2lr

#endif  // TRACE2LR_TIME_HPP
