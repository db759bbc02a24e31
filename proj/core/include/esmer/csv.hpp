#pragma once

#include <charconv>
#include <cstdint>
#include <string>

namespace esmer {

// Shortest round-trip decimal form; keeps CSV output byte-stable across runs.
inline std::string csv_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace esmer
