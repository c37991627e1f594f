// Copyright 2026 The cnnlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "cnnlab/number_format.hpp"

#include <fmt/format.h>

#include <cmath>
#include <cstdlib>

namespace cnnlab {

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value < 0 ? "-inf" : "inf";
  if (value == 0.0) return "0";
  // Scientific rendering does the rounding; the digits are then re-placed.
  const std::string sci = fmt::format("{:.5e}", std::fabs(value));
  const auto e_pos = sci.find('e');
  std::string digits = sci.substr(0, 1) + sci.substr(2, e_pos - 2);
  const int exponent = std::atoi(sci.c_str() + e_pos + 1);

  std::string out;
  if (exponent >= 5) {
    out = digits + std::string(static_cast<std::size_t>(exponent - 5), '0');
  } else if (exponent >= 0) {
    const auto split = static_cast<std::size_t>(exponent + 1);
    out = digits.substr(0, split) + "." + digits.substr(split);
  } else {
    out = "0." + std::string(static_cast<std::size_t>(-exponent - 1), '0') + digits;
  }
  if (out.find('.') != std::string::npos) {
    while (out.back() == '0') out.pop_back();
    if (out.back() == '.') out.pop_back();
  }
  return value < 0 ? "-" + out : out;
}

}  // namespace cnnlab
