#pragma once

namespace lexchain {

inline constexpr const char *kVersion = "0.1.0";

} // namespace lexchain
