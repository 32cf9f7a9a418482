#include "csv.h"

#include <charconv>
#include <fstream>
#include <sstream>

#include "fovstream/errors.h"

namespace fovstream::csv {

namespace {

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> Split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(Trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

Table Parse(const std::string& text, bool has_header) {
  Table t;
  std::istringstream is(text);
  std::string line;
  int n = 0;
  bool need_header = has_header;
  while (std::getline(is, line)) {
    ++n;
    const std::string trimmed = Trim(line);
    if (trimmed.empty() || trimmed[0] == '#') continue;
    if (need_header) {
      t.header = Split(trimmed);
      need_header = false;
      continue;
    }
    t.rows.push_back(Split(trimmed));
    t.line_numbers.push_back(n);
  }
  return t;
}

Table Read(const std::string& path, bool has_header) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return Parse(ss.str(), has_header);
}

int Column(const Table& t, const std::string& name) {
  for (std::size_t i = 0; i < t.header.size(); ++i) {
    if (t.header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

double ToDouble(const std::string& field, const std::string& where) {
  double v = 0.0;
  const char* end = field.data() + field.size();
  auto [p, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || p != end || field.empty()) {
    throw InputError(where + ": '" + field + "' is not a number");
  }
  return v;
}

long long ToInt(const std::string& field, const std::string& where) {
  long long v = 0;
  const char* end = field.data() + field.size();
  auto [p, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || p != end || field.empty()) {
    throw InputError(where + ": '" + field + "' is not an integer");
  }
  return v;
}

}  // namespace fovstream::csv
