#pragma once

#include <ostream>

namespace tissueseg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitNonFinite = 2;
inline constexpr int kExitPoolUnderflow = 3;

/// Full command-line entry point; never throws.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tissueseg::cli
