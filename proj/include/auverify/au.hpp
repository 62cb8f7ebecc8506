#pragma once

#include <array>
#include <cctype>
#include <cstdio>
#include <string>
#include <string_view>

#include "auverify/errors.hpp"

namespace auverify {

/// Action Units associated with pain expressions.
inline constexpr std::array<std::string_view, 8> kPainAus = {
    "AU04", "AU06", "AU07", "AU09", "AU10", "AU25", "AU26", "AU27"};

/// Normalizes "AU4", "au04" and "4" to "AU04".
inline std::string canonical_au(std::string_view id) {
  std::string_view digits = id;
  if (digits.size() >= 2 && (digits[0] == 'A' || digits[0] == 'a') &&
      (digits[1] == 'U' || digits[1] == 'u')) {
    digits.remove_prefix(2);
  }
  if (digits.empty() || digits.size() > 3) {
    throw ParseError("malformed action unit id '" + std::string(id) + "'");
  }
  int number = 0;
  for (char ch : digits) {
    if (!std::isdigit(static_cast<unsigned char>(ch))) {
      throw ParseError("malformed action unit id '" + std::string(id) + "'");
    }
    number = number * 10 + (ch - '0');
  }
  char buf[8];
  std::snprintf(buf, sizeof buf, "AU%02d", number);
  return buf;
}

}  // namespace auverify
