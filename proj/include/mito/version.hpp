#pragma once

namespace mito {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace mito
