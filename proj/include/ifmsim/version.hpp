#pragma once

namespace ifmsim {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ifmsim
