#include "mbda/io.hpp"

#include "mbda/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace mbda::io {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view line, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

std::vector<Row> read_delimited(const std::filesystem::path &path, bool allow_comments) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::vector<Row> rows;
  std::string line;
  char delim = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (allow_comments && trim(line).front() == '#') continue;
    if (delim == 0) delim = line.find('\t') != std::string::npos ? '\t' : ',';
    rows.push_back(split(line, delim));
  }
  return rows;
}

double parse_double(std::string_view cell, std::string_view context) {
  const std::string s = trim(cell);
  if (s == "NA" || s == "nan" || s == "NaN") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double value = 0.0;
  const auto *begin = s.data();
  const auto *end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end || s.empty())
    throw Error(ErrorKind::Parse, "malformed number '" + s + "' in " + std::string(context));
  return value;
}

long long parse_integer(std::string_view cell, std::string_view context) {
  const std::string s = trim(cell);
  long long value = 0;
  const auto *begin = s.data();
  const auto *end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec == std::errc{} && ptr == end && !s.empty()) return value;
  // Accept integral values written in floating-point form ("12.0", "1e3").
  double d = 0.0;
  auto [dptr, dec] = std::from_chars(begin, end, d);
  if (dec == std::errc{} && dptr == end && !s.empty() && std::floor(d) == d &&
      std::abs(d) < 9.0e18)
    return static_cast<long long>(d);
  throw Error(ErrorKind::Parse, "malformed integer '" + s + "' in " + std::string(context));
}

std::string format_double(double value) {
  if (std::isnan(value)) return "NA";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

void write_text(const std::filesystem::path &path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

}  // namespace mbda::io
