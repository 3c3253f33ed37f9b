#pragma once

namespace flowsift {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace flowsift
