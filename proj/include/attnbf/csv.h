// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace attnbf {

// RFC 4180 field quoting: fields containing a comma, double quote, CR or LF
// are wrapped in double quotes with embedded quotes doubled.
std::string csv_field(const std::string& value);
std::string csv_line(const std::vector<std::string>& fields);  // CRLF-terminated

// Shortest decimal form that reads back to the same double.
std::string format_double(double value);

// Splits a file written by CsvWriter back into records (quoted fields,
// embedded commas and line breaks allowed).
std::vector<std::vector<std::string>> read_csv(const std::string& path);

class CsvWriter {
 public:
  // Truncates unless `append` is set; the header is written only to an empty
  // file. Throws IoError.
  CsvWriter(const std::string& path, const std::vector<std::string>& header, bool append = false);
  void row(const std::vector<std::string>& fields);
  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
  std::string path_;
};

}  // namespace attnbf
