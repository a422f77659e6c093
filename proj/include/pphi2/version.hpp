#pragma once

#ifndef PPHI2_VERSION
#define PPHI2_VERSION "0.1.0"
#endif

namespace pphi2 {

inline constexpr const char* version = PPHI2_VERSION;

} // namespace pphi2
