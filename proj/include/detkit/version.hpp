#pragma once

namespace detkit {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace detkit
