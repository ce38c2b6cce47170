// src/csv.cpp

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

#include "trace2lr/csv.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "trace2lr/common.hpp"

namespace trace2lr {

namespace {

std::vector<std::string> split_line(const std::string& line, char delim, std::size_t lineno) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"' && trim(field).empty() && !was_quoted) {
      quoted = true;
      was_quoted = true;
      field.clear();
    } else if (c == delim) {
      out.push_back(was_quoted ? field : trim(field));
      field.clear();
      was_quoted = false;
    } else {
      field += c;
    }
  }
  if (quoted)
    throw ValidationError("unterminated quote on line " + std::to_string(lineno));
  out.push_back(was_quoted ? field : trim(field));
  return out;
}

}  // namespace

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

CsvTable read_csv(std::istream& in, char delim) {
  CsvTable t;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!have_header) {
      if (trim(line).empty()) continue;
      t.header = split_line(line, delim, lineno);
      have_header = true;
      continue;
    }
    if (trim(line).empty()) continue;
    auto fields = split_line(line, delim, lineno);
    if (fields.size() != t.header.size())
      throw ValidationError("line " + std::to_string(lineno) + ": expected " +
                            std::to_string(t.header.size()) + " fields, got " +
                            std::to_string(fields.size()));
    t.rows.push_back(std::move(fields));
    t.line_numbers.push_back(lineno);
  }
  if (!have_header) throw ValidationError("missing header row");
  return t;
}

CsvTable read_csv_file(const std::string& path, char delim) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open file '" + path + "'");
  return read_csv(in, delim);
}

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields, char delim) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << delim;
    const std::string& f = fields[i];
    bool need_quote = f.find_first_of({delim, '"', '\n'}) != std::string::npos ||
                      (!f.empty() && (f.front() == ' ' || f.back() == ' '));
    if (need_quote) {
      out << '"';
      for (char c : f) {
        if (c == '"') out << '"';
        out << c;
      }
      out << '"';
    } else {
      out << f;
    }
  }
  out << '\n';
}

std::string format_double(double v) {
  // Shortest representation that parses back to the same double.
  char best[40];
  std::snprintf(best, sizeof(best), "%.17g", v);
  for (int prec = 1; prec < 17; ++prec) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    double back = 0;
    std::sscanf(buf, "%lf", &back);
    if (back == v && std::strlen(buf) < std::strlen(best)) std::memcpy(best, buf, sizeof(buf));
  }
  return best;
}

}  // namespace trace2lr
