#pragma once

namespace elsi {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace elsi
