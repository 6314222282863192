#pragma once

#include <stdexcept>
#include <string>

namespace glwb {

// Bad or inconsistent user-supplied configuration (files, parameter sets).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// The numerical method produced an invalid quantity (negative probability,
// non-finite value).  Carries the location it was detected at.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Fee calibration cannot bracket a root: the contract is worth less than the
// premium even with a zero account fee.
struct InfeasibleFeeError : std::runtime_error {
    explicit InfeasibleFeeError(const std::string& what) : std::runtime_error(what) {}
};

inline constexpr int kMaxAge = 122;          // forced absorption age
inline constexpr int kHealthStates = 7;      // 1..6 alive, 7 dead
inline constexpr int kDeadState = 7;

} // namespace glwb
