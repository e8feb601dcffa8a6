#include "msynth/format.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <system_error>

namespace msynth {

std::string format_real(double value) {
    if (value == 0.0) {
        return "0";
    }
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

std::string format_fixed(double value, int decimals) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::fixed, decimals);
    std::string out(buf, res.ptr);
    // "-0.000" -> "0.000"
    if (!out.empty() && out[0] == '-' && out.find_first_not_of("-0.") == std::string::npos) {
        out.erase(0, 1);
    }
    return out;
}

std::string format_significant(double value, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%#.*g", digits, value);
    std::string out(buf);
    if (!out.empty() && out[0] == '-' && out.find_first_not_of("-0.") == std::string::npos) {
        out.erase(0, 1);
    }
    if (!out.empty() && out.back() == '.') {
        out.pop_back();
    }
    return out;
}

bool parse_real(const std::string& text, double& out) {
    if (text.empty()) {
        return false;
    }
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (*first == '+') {
        ++first;
    }
    const auto res = std::from_chars(first, last, out);
    return res.ec == std::errc() && res.ptr == last && std::isfinite(out);
}

}  // namespace msynth
