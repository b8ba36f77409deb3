#include "text_format.hpp"

#include <charconv>
#include <system_error>

#include "errors.hpp"

namespace lumpfit {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

double parse_double(std::string_view text, std::string_view what) {
  std::string_view t = trim(text);
  if (!t.empty() && t.front() == '+') t.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc{} || res.ptr != t.data() + t.size()) {
    fail(ErrorCode::malformed_row,
         "cannot parse " + std::string(what) + " from '" + std::string(text) + "'");
  }
  return v;
}

}  // namespace lumpfit
