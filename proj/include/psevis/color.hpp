#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <string>
#include <string_view>

#include "psevis/errors.hpp"

namespace psevis {

/// sRGB color with channels on the 0..255 scale. Channels stay real-valued so
/// interpolated colors are exact; rounding happens only in to_hex().
struct Rgb {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

inline constexpr Rgb kWhite{255.0, 255.0, 255.0};

inline Rgb parse_hex_color(std::string_view text) {
  auto nibble = [&](char ch) -> int {
    if (ch >= '0' && ch <= '9') return ch - '0';
    const char lower = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (lower >= 'a' && lower <= 'f') return lower - 'a' + 10;
    throw FormatError("invalid color '" + std::string(text) + "', expected #RRGGBB");
  };
  if (text.size() != 7 || text[0] != '#') {
    throw FormatError("invalid color '" + std::string(text) + "', expected #RRGGBB");
  }
  auto channel = [&](std::size_t pos) {
    return static_cast<double>(nibble(text[pos]) * 16 + nibble(text[pos + 1]));
  };
  return Rgb{channel(1), channel(3), channel(5)};
}

inline std::string to_hex(const Rgb& color) {
  auto quantize = [](double v) {
    return static_cast<int>(std::lround(std::clamp(v, 0.0, 255.0)));
  };
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02X%02X%02X", quantize(color.r), quantize(color.g),
                quantize(color.b));
  return buf;
}

inline bool is_hex_color(std::string_view text) {
  if (text.size() != 7 || text[0] != '#') return false;
  return std::all_of(text.begin() + 1, text.end(),
                     [](char ch) { return std::isxdigit(static_cast<unsigned char>(ch)) != 0; });
}

}  // namespace psevis
