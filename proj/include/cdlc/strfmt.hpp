#pragma once

#include <charconv>
#include <string>

namespace cdlc {

/// Shortest representation that round-trips a double exactly.
/// Locale-independent, so written files parse anywhere.
inline std::string fmt_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string fmt_fixed(double v, int decimals) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, decimals);
    return std::string(buf, res.ptr);
}

} // namespace cdlc
