#include "spt/csv.hpp"

#include "spt/errors.hpp"

#include <array>
#include <charconv>
#include <cmath>

namespace spt::csv {

std::string format_double(double value) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) throw NumericError("cannot format double");
  return std::string(buf.data(), end);
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

}  // namespace

double parse_double(std::string_view field, std::size_t line_number) {
  field = trim(field);
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (!field.empty() && field.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (field.empty() || ec != std::errc{} || ptr != last) {
    throw DataError("line " + std::to_string(line_number) +
                    ": cannot parse number '" + std::string(field) + "'");
  }
  return value;
}

bool parse_bool(std::string_view field, std::size_t line_number,
                bool empty_value) {
  field = trim(field);
  if (field.empty()) return empty_value;
  if (field == "1" || field == "true" || field == "TRUE" || field == "True") return true;
  if (field == "0" || field == "false" || field == "FALSE" || field == "False") return false;
  throw DataError("line " + std::to_string(line_number) +
                  ": cannot parse boolean '" + std::string(field) + "'");
}

bool Reader::next(std::string& line) {
  while (std::getline(in_, line)) {
    ++line_number_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    return true;
  }
  return false;
}

std::size_t column(const std::vector<std::string_view>& header,
                   std::string_view name) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (trim(header[i]) == name) return i;
  }
  throw DataError("missing column '" + std::string(name) + "'");
}

}  // namespace spt::csv
