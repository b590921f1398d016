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


#ifndef DIFFABM_IO_CSV_H_
#define DIFFABM_IO_CSV_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace diffabm::io {

// One parsed data row plus its 1-based line number in the source file.
struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

// Reads a comma-separated file whose first line must equal `header` exactly.
// Blank lines are skipped; quoting is not supported (none of our schemas
// need it). ParseError on a missing file, a wrong header or a row with the
// wrong number of fields.
class CsvFile {
 public:
  CsvFile(const std::filesystem::path& path, std::string_view header);

  const std::vector<CsvRow>& rows() const { return rows_; }
  const std::string& name() const { return name_; }

  // Field converters; throw ParseError naming the row and column.
  std::int64_t Int(const CsvRow& row, std::size_t col) const;
  double Real(const CsvRow& row, std::size_t col) const;
  // Empty field -> -1.
  std::int64_t OptionalInt(const CsvRow& row, std::size_t col) const;
  [[noreturn]] void Fail(const CsvRow& row, const std::string& what) const;

 private:
  std::string name_;
  std::vector<std::string> columns_;
  std::vector<CsvRow> rows_;
};

std::vector<std::string> SplitCsvLine(std::string_view line);

// Shortest round-trippable decimal form of a double.
std::string FormatReal(double v);

// Writes `contents` to `path`, creating parent directories. Throws DataError
// if the file cannot be written.
void WriteFile(const std::filesystem::path& path, const std::string& contents);

}  // namespace diffabm::io

#endif  // DIFFABM_IO_CSV_H_
