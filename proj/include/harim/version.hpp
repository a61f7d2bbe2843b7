#pragma once

namespace harim {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace harim
