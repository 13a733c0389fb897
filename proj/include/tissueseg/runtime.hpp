#pragma once

#include <cstdint>

namespace tissueseg {

inline constexpr const char* kDeterministicEnv = "TISSUESEG_DETERMINISTIC";

/// True when TISSUESEG_DETERMINISTIC is set to anything but "" or "0".
bool deterministic_requested();

/// Seeds torch and, in deterministic mode, pins one intra-op thread and
/// enables deterministic kernels.
void configure_runtime(std::uint64_t seed, bool deterministic);

}  // namespace tissueseg
