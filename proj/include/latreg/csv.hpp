#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace latreg::csv {

/// Reads one RFC 4180 record (quoted fields may span lines). Returns nullopt
/// at end of input. `line` is advanced by the number of physical lines read.
std::optional<std::vector<std::string>> read_record(std::istream& in, std::size_t& line);

/// Quotes a field only when it contains a delimiter, quote or newline.
std::string escape(std::string_view field);

void write_record(std::ostream& out, const std::vector<std::string>& fields);

/// Shortest round-trip decimal form of a double ("nan" for NaN).
std::string format_number(double value);

}  // namespace latreg::csv
