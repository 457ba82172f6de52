#pragma once

#include <charconv>
#include <cmath>
#include <string>
#include <system_error>

namespace cvsketch {

/// Shortest decimal that round-trips to the same double; locale independent.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";  // also folds -0
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// Inverse of format_double; false on trailing garbage.
inline bool parse_double(std::string_view text, double& out) {
  if (text == "nan") {
    out = std::nan("");
    return true;
  }
  if (text == "inf" || text == "-inf") {
    out = text[0] == '-' ? -HUGE_VAL : HUGE_VAL;
    return true;
  }
  const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

}  // namespace cvsketch
