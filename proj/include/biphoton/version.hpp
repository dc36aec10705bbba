#pragma once

namespace biphoton {

inline constexpr const char* version = "0.1.0";

}  // namespace biphoton
