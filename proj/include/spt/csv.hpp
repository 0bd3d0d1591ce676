#pragma once

#include <cstddef>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace spt::csv {

/// Shortest decimal form that round-trips to the same double.
std::string format_double(double value);

/// Splits on commas; fields are not quoted in any file this project writes.
std::vector<std::string_view> split(std::string_view line);

/// Parses a full field as a double. Throws spt::DataError naming the line.
double parse_double(std::string_view field, std::size_t line_number);

/// Parses a boolean field: 1/0/true/false; empty yields `empty_value`.
bool parse_bool(std::string_view field, std::size_t line_number,
                bool empty_value);

/// Line reader that tracks 1-based line numbers and skips blank lines.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  /// Next non-blank line with any trailing '\r' removed; false at EOF.
  bool next(std::string& line);

  [[nodiscard]] std::size_t line_number() const { return line_number_; }

 private:
  std::istream& in_;
  std::size_t line_number_ = 0;
};

/// Index of `name` in a header row; throws spt::DataError if absent.
std::size_t column(const std::vector<std::string_view>& header,
                   std::string_view name);

}  // namespace spt::csv
