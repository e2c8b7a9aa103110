#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>

namespace demri {

// Six significant digits, the fixed precision of every file the tools write.
inline std::string format6(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// Rounds through format6 so JSON serialisation prints the same digits.
inline double round6(double v) {
  if (!std::isfinite(v)) return v;
  const double r = std::strtod(format6(v).c_str(), nullptr);
  return r == 0.0 ? 0.0 : r;
}

}  // namespace demri
