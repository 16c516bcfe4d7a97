#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace hierfc::csv {

/// Splits one line on commas. Surrounding whitespace and a single pair of
/// double quotes are stripped from each field; quoted commas are honoured.
std::vector<std::string> split_line(std::string_view line);

/// Reads the next non-empty line, dropping a trailing '\r'. Returns false at EOF.
bool next_line(std::istream& in, std::string& line, std::size_t& line_no);

/// Parses a double; throws ParseError naming `context` on failure.
double parse_double(std::string_view text, std::string_view context);

/// Shortest round-trip decimal representation.
std::string format_double(double value);

/// Quotes a field when it contains a comma or quote.
std::string escape(std::string_view field);

}  // namespace hierfc::csv
