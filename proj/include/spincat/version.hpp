#pragma once

namespace spincat {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace spincat
