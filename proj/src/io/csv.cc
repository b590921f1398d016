// Copyright 2026 The diffabm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "diffabm/io/csv.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "diffabm/errors.h"

namespace diffabm::io {

std::vector<std::string> SplitCsvLine(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      return out;
    }
    out.emplace_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

CsvFile::CsvFile(const std::filesystem::path& path, std::string_view header)
    : name_(path.string()), columns_(SplitCsvLine(header)) {
  std::ifstream in(path);
  if (!in) throw ParseError(name_, 0, "cannot open file");
  std::string line;
  std::size_t lineno = 0;
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!seen_header) {
      if (line != header) {
        throw ParseError(name_, lineno,
                         "expected header '" + std::string(header) + "'");
      }
      seen_header = true;
      continue;
    }
    CsvRow row{lineno, SplitCsvLine(line)};
    if (row.fields.size() != columns_.size()) {
      throw ParseError(name_, lineno,
                       "expected " + std::to_string(columns_.size()) +
                           " fields, got " + std::to_string(row.fields.size()));
    }
    rows_.push_back(std::move(row));
  }
  if (!seen_header) throw ParseError(name_, lineno + 1, "missing header");
}

void CsvFile::Fail(const CsvRow& row, const std::string& what) const {
  throw ParseError(name_, row.line, what);
}

std::int64_t CsvFile::Int(const CsvRow& row, std::size_t col) const {
  const std::string& s = row.fields[col];
  std::int64_t v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size() || s.empty()) {
    Fail(row, columns_[col] + ": not an integer: '" + s + "'");
  }
  return v;
}

double CsvFile::Real(const CsvRow& row, std::size_t col) const {
  const std::string& s = row.fields[col];
  double v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size() || s.empty() ||
      !std::isfinite(v)) {
    Fail(row, columns_[col] + ": not a finite number: '" + s + "'");
  }
  return v;
}

std::int64_t CsvFile::OptionalInt(const CsvRow& row, std::size_t col) const {
  if (row.fields[col].empty()) return -1;
  const std::int64_t v = Int(row, col);
  if (v < 0) Fail(row, columns_[col] + ": negative id");
  return v;
}

std::string FormatReal(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

void WriteFile(const std::filesystem::path& path,
               const std::string& contents) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  out << contents;
  if (!out) throw DataError("cannot write " + path.string());
}

}  // namespace diffabm::io
