#pragma once

namespace twinspect {

inline constexpr const char* kVersion = "0.1.0";

} // namespace twinspect
