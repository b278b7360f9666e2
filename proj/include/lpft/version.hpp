#pragma once

#include <string>

namespace lpft {

inline constexpr const char* kVersion = "1.0.0";

std::string eigen_version();
std::string json_version();

}  // namespace lpft
