// include/trace2lr/csv.hpp

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

#ifndef TRACE2LR_CSV_HPP
#define TRACE2LR_CSV_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace trace2lr {

/// A parsed delimited-text table. Unquoted fields are whitespace-trimmed,
/// double-quoted fields are taken verbatim ("" escapes a quote).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;  // each padded/checked to header size
  std::vector<std::size_t> line_numbers;       // 1-based source line of each row

  /// Column index by (trimmed, case-sensitive) header name, or -1.
  int column(const std::string& name) const;
};

CsvTable read_csv(std::istream& in, char delim = ',');
CsvTable read_csv_file(const std::string& path, char delim = ',');

/// Quotes only when needed; writes "\n" line endings.
void write_csv_row(std::ostream& out, const std::vector<std::string>& fields, char delim = ',');

std::string format_double(double v);  // locale-independent, round-trip precision

}  // namespace trace2lr

#endif  // TRACE2LR_CSV_HPP
