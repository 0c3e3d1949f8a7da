#pragma once

#include <charconv>
#include <cmath>
#include <string>

namespace qkdnet {

/// Locale-independent rendering with 12 significant digits.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 12);
  return std::string(buf, res.ptr);
}

}  // namespace qkdnet
