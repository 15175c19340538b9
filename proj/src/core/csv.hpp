#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace heterodyn {

// Shortest round-trip decimal representation of a double ('.' decimal point,
// locale-independent), so runs with identical inputs produce byte-identical
// files.
std::string format_double(double value);

// Minimal RFC-4180-style CSV writer: fields containing commas, quotes, or
// newlines are quoted, quotes doubled, rows end with '\n'.
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path);
  void write_row(const std::vector<std::string>& fields);
  bool good() const { return out_.good(); }

 private:
  std::ofstream out_;
};

}  // namespace heterodyn
