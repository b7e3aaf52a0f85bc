#pragma once

namespace agnn {

inline constexpr const char* kEngineVersion = "0.1.0";

}  // namespace agnn
