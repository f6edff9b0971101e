#pragma once

#include <string>

namespace echolab {

/// Number of significant digits in every numeric output.
inline constexpr int kOutputDigits = 9;

/// Fixed-precision text for a double ("%.9g"); non-finite values print as nan/inf/-inf.
std::string format_number(double v);

}  // namespace echolab
