#pragma once

namespace stargraph {
inline constexpr const char* kProjectVersion = "0.1.0";
}
