#include "echolab/format.hpp"

#include <cmath>
#include <cstdio>

namespace echolab {

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) return "0";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*g", kOutputDigits, v);
    return buf;
}

}  // namespace echolab
