#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace actbench::csv {

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Minimal RFC 4180: comma separated, double-quote escaping, no embedded
// newlines. Blank lines are skipped.
std::vector<std::string> split_line(std::string_view line);
std::string escape(std::string_view field);
std::string join(const std::vector<std::string>& fields);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row

  std::optional<std::size_t> find_column(std::string_view name) const;
  /// Throws SchemaError naming the missing column.
  std::size_t column(std::string_view name) const;
};

/// Reads a header line plus rows. Throws SchemaError on ragged rows or an
/// empty input.
Table read(std::istream& in);

/// "NA" or empty marks an absent value.
bool is_absent(std::string_view field) noexcept;
inline constexpr std::string_view kAbsent = "NA";

double parse_double(std::string_view field, std::string_view column, std::size_t line);
long long parse_integer(std::string_view field, std::string_view column, std::size_t line);

/// Shortest decimal text that reads back to exactly `v`.
std::string format_double(double v);

}  // namespace actbench::csv
