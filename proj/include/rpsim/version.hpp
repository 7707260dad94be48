#pragma once

namespace rpsim {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace rpsim
