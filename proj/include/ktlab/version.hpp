#pragma once

namespace ktlab {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ktlab
