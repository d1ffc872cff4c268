#pragma once

#include <cstdio>
#include <string>

namespace omv {

/// Shortest form that round-trips a double (17 significant digits).
[[nodiscard]] inline std::string fmt17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace omv
