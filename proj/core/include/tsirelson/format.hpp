#pragma once

#include <initializer_list>
#include <string>
#include <string_view>

namespace tsirelson {

/// "%.17g": round-trips every double and is byte-stable across runs.
std::string format_real(double value);

/// Joins already formatted fields with commas and a trailing newline.
std::string csv_row(std::initializer_list<std::string_view> fields);

}  // namespace tsirelson
