#pragma once

namespace lgm {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace lgm
