#pragma once

#include <string>

namespace msynth {

/// Shortest decimal string that parses back to the same double. Locale
/// independent; negative zero prints as "0".
std::string format_real(double value);

/// Fixed-point rendering with `decimals` digits after the point.
std::string format_fixed(double value, int decimals);

/// `digits` significant digits, trailing zeros kept ("2.000", "0.5000").
std::string format_significant(double value, int digits);

/// Locale-independent strtod over the full string; nullopt-like false on junk.
bool parse_real(const std::string& text, double& out);

}  // namespace msynth
