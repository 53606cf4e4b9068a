#pragma once

namespace covdist {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace covdist
