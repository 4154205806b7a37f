#pragma once

namespace calib {

inline constexpr const char* kToolName = "calib";
inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace calib
