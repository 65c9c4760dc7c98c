#pragma once

namespace decpep {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace decpep
