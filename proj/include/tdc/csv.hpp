#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace tdc::csv {

/// Shortest round-trip representation ("%.17g" trimmed where exact).
std::string format_double(double v);

/// Splits on commas. Fields never contain commas or quotes in the formats
/// written by this project, so no quoting is supported.
std::vector<std::string> split(std::string_view line);

std::string join(const std::vector<std::string>& fields);

/// Throws SchemaMismatch naming `column` if `text` is not a full number.
double parse_double(const std::string& text, const std::string& column);

/// Splits text into lines, dropping '\r' and a trailing empty line.
std::vector<std::string> lines(std::string_view text);

}  // namespace tdc::csv
