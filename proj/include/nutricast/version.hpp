#pragma once

namespace nutricast {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace nutricast
