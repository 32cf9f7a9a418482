#ifndef FOVSTREAM_SRC_CSV_H_
#define FOVSTREAM_SRC_CSV_H_

#include <string>
#include <vector>

namespace fovstream::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> line_numbers;  // 1-based source line of each row
};

// Comma-separated, '#' comments and blank lines skipped, fields trimmed.
// With `has_header` the first data line becomes the header.
Table Read(const std::string& path, bool has_header = true);
Table Parse(const std::string& text, bool has_header = true);

int Column(const Table& t, const std::string& name);  // -1 when absent
double ToDouble(const std::string& field, const std::string& where);
long long ToInt(const std::string& field, const std::string& where);

}  // namespace fovstream::csv

#endif  // FOVSTREAM_SRC_CSV_H_
