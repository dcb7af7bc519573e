#pragma once

// Number formatting shared by the CSV writers and readers.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <string>
#include <string_view>
#include <system_error>

namespace wavebench {

/// Six significant digits, the precision of every CSV artifact.
inline std::string format_sig6(double x) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.6g", x);
  return std::string(buf, static_cast<std::size_t>(n));
}

inline void append_sig6(std::string& out, double x) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.6g", x);
  out.append(buf, static_cast<std::size_t>(n));
}

/// Parses a full string as a double; false on trailing garbage.
inline bool parse_double(std::string_view s, double& out) {
  if (s == "inf") { out = INFINITY; return true; }
  if (s == "-inf") { out = -INFINITY; return true; }
  if (s == "nan") { out = NAN; return true; }
  const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
  return r.ec == std::errc() && r.ptr == s.data() + s.size();
}

/// The value a CSV reader gets back for x.
inline double quantize_sig6(double x) {
  double out = x;
  parse_double(format_sig6(x), out);
  return out;
}

}  // namespace wavebench
