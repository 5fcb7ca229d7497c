#pragma once

namespace vqad {

inline constexpr const char* kVersionTag = "vqad-0.1.0";

}  // namespace vqad
