#pragma once

#include <string>
#include <string_view>

namespace lumpfit {

/// Shortest round-trip decimal representation.
std::string format_double(double v);

/// Strict parse of a whole field (surrounding blanks allowed). Throws
/// MalformedRow naming `what` on failure.
double parse_double(std::string_view text, std::string_view what);

std::string_view trim(std::string_view s);

}  // namespace lumpfit
