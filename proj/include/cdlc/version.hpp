#pragma once

namespace cdlc {

inline constexpr const char* kToolVersion = "0.1.0";

} // namespace cdlc
