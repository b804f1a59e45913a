#pragma once

#include <charconv>
#include <string>
#include <system_error>

namespace sieve {

/// Shortest decimal representation that parses back to the same double.
inline std::string format_double(double value) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, ptr);
}

}  // namespace sieve
