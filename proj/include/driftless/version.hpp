#pragma once

namespace driftless {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace driftless
